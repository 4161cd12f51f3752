//! Stage one: a high-recall candidate generator.
//!
//! Entities are found with hand-written scanners over the character array
//! (offsets are character offsets throughout). Every symbol/value pair that
//! lies within the pairing window and satisfies the range constraints
//! becomes a candidate; deciding which candidates are right is left to the
//! later stages.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::section_window;
use crate::error::{Error, Result};
use crate::io;
use crate::symbols::SymbolTable;
use crate::types::{RelationKind, Span};

/// Default character window between a symbol mention and its value.
pub const DEFAULT_MAX_PAIR_DISTANCE: usize = 160;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub timestamp: i64,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, timestamp: i64) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::InvalidConfig("document text is empty".into()));
        }
        Ok(Document {
            doc_id: doc_id.into(),
            text,
            timestamp,
        })
    }

    pub fn chars(&self) -> Vec<char> {
        self.text.chars().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    TsSymbol,
    NumericValue,
    ChangeValue,
    Date,
    Time,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::TsSymbol,
        EntityType::NumericValue,
        EntityType::ChangeValue,
        EntityType::Date,
        EntityType::Time,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tag(self) -> &'static str {
        match self {
            EntityType::TsSymbol => "SYM",
            EntityType::NumericValue => "NUM",
            EntityType::ChangeValue => "CHG",
            EntityType::Date => "DATE",
            EntityType::Time => "TIME",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Normalized {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub entity_type: EntityType,
    pub span: Span,
    /// Resolved symbol name, the numeric value (percent stripped, change
    /// values signed), or the raw date/time text.
    pub normalized: Normalized,
}

impl EntitySpan {
    pub fn number(&self) -> Option<f64> {
        match self.normalized {
            Normalized::Number(v) => Some(v),
            Normalized::Text(_) => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match &self.normalized {
            Normalized::Text(s) => Some(s),
            Normalized::Number(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionCandidate {
    pub doc_id: String,
    pub timestamp: i64,
    pub kind: RelationKind,
    pub symbol: String,
    pub value: f64,
    pub symbol_span: Span,
    pub value_span: Span,
    pub section_span: Span,
    #[serde(default)]
    pub aux: BTreeMap<String, String>,
}

impl ExtractionCandidate {
    /// Characters between the symbol and value spans.
    pub fn pair_gap(&self) -> usize {
        self.symbol_span.gap(&self.value_span)
    }
}

/// Inclusive numeric range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

impl From<[f64; 2]> for ValueRange {
    fn from([min, max]: [f64; 2]) -> Self {
        ValueRange { min, max }
    }
}

impl From<ValueRange> for [f64; 2] {
    fn from(r: ValueRange) -> Self {
        [r.min, r.max]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolRanges {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs: Option<ValueRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel: Option<ValueRange>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    pub ranges: BTreeMap<String, SymbolRanges>,
    pub max_pair_distance: usize,
}

impl ConstraintSet {
    pub fn new(ranges: BTreeMap<String, SymbolRanges>, max_pair_distance: usize) -> Result<Self> {
        for (sym, r) in &ranges {
            for range in [r.abs, r.rel].into_iter().flatten() {
                if !(range.min <= range.max) {
                    return Err(Error::InvalidConfig(format!("inverted range for {sym}")));
                }
            }
        }
        Ok(ConstraintSet {
            ranges,
            max_pair_distance,
        })
    }

    pub fn from_symbols(table: &SymbolTable, max_pair_distance: usize) -> Self {
        let ranges = table
            .entries()
            .iter()
            .map(|e| {
                let r = SymbolRanges {
                    abs: Some(ValueRange {
                        min: e.min_value,
                        max: e.max_value,
                    }),
                    rel: Some(ValueRange {
                        min: e.rel_min,
                        max: e.rel_max,
                    }),
                };
                (e.symbol.clone(), r)
            })
            .collect();
        ConstraintSet {
            ranges,
            max_pair_distance,
        }
    }

    pub fn range(&self, symbol: &str, kind: RelationKind) -> Option<ValueRange> {
        let r = self.ranges.get(symbol)?;
        match kind {
            RelationKind::TickAbs => r.abs,
            RelationKind::TickRel => r.rel,
        }
    }

    pub fn load(path: &Path, max_pair_distance: usize) -> Result<Self> {
        ConstraintSet::new(io::read_json(path)?, max_pair_distance)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.ranges)
    }
}

/// Range and window check. Symbols or kinds without a declared range are
/// accepted.
pub fn apply_constraints(candidate: &ExtractionCandidate, constraints: &ConstraintSet) -> bool {
    if candidate.pair_gap() > constraints.max_pair_distance {
        return false;
    }
    match constraints.range(&candidate.symbol, candidate.kind) {
        Some(r) => r.contains(candidate.value),
        None => true,
    }
}

const UP_CUES: [&str; 3] = ["up", "rose", "gained"];
const DOWN_CUES: [&str; 3] = ["down", "fell", "lost"];

struct AliasMatcher {
    // (lowercased alias chars, symbol), longest first
    aliases: Vec<(Vec<char>, String)>,
}

impl AliasMatcher {
    fn new(symbols: &SymbolTable) -> Self {
        let mut aliases: Vec<(Vec<char>, String)> = symbols
            .entries()
            .iter()
            .flat_map(|e| {
                e.aliases
                    .iter()
                    .map(move |a| (a.chars().map(lower).collect(), e.symbol.clone()))
            })
            .collect();
        aliases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        AliasMatcher { aliases }
    }

    fn find_all(&self, lowered: &[char]) -> Vec<(Span, String)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < lowered.len() {
            if i > 0 && is_word(lowered[i - 1]) {
                i += 1;
                continue;
            }
            let hit = self.aliases.iter().find(|(alias, _)| {
                let end = i + alias.len();
                end <= lowered.len()
                    && lowered[i..end] == alias[..]
                    && (end == lowered.len() || !is_word(lowered[end]) || !is_word(alias[alias.len() - 1]))
            });
            match hit {
                Some((alias, sym)) => {
                    out.push((Span::new(i, i + alias.len()), sym.clone()));
                    i += alias.len();
                }
                None => i += 1,
            }
        }
        out
    }
}

fn lower(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn run_digits(chars: &[char], i: usize) -> usize {
    chars[i.min(chars.len())..]
        .iter()
        .take_while(|c| c.is_ascii_digit())
        .count()
}

fn boundary_before(chars: &[char], i: usize) -> bool {
    i == 0 || !is_word(chars[i - 1])
}

fn boundary_after(chars: &[char], end: usize) -> bool {
    end >= chars.len() || !is_word(chars[end])
}

fn at(chars: &[char], i: usize, c: char) -> bool {
    chars.get(i) == Some(&c)
}

/// `YYYY-MM-DD` or `MM/DD/YYYY` starting at `i`.
fn scan_date(chars: &[char], i: usize) -> Option<usize> {
    if !boundary_before(chars, i) {
        return None;
    }
    let d = run_digits(chars, i);
    let end = if d == 4 && at(chars, i + 4, '-') {
        let j = i + 5;
        (run_digits(chars, j) == 2 && at(chars, j + 2, '-') && run_digits(chars, j + 3) == 2)
            .then_some(j + 5)
    } else if (1..=2).contains(&d) && at(chars, i + d, '/') {
        let j = i + d + 1;
        let d2 = run_digits(chars, j);
        ((1..=2).contains(&d2) && at(chars, j + d2, '/') && run_digits(chars, j + d2 + 1) == 4)
            .then_some(j + d2 + 5)
    } else {
        None
    }?;
    boundary_after(chars, end).then_some(end)
}

/// `H:MM` / `HH:MM` with an optional `am`/`pm` suffix (optionally after one
/// space).
fn scan_time(chars: &[char], i: usize) -> Option<usize> {
    if !boundary_before(chars, i) {
        return None;
    }
    let d = run_digits(chars, i);
    if !(1..=2).contains(&d) || !at(chars, i + d, ':') || run_digits(chars, i + d + 1) != 2 {
        return None;
    }
    let mut end = i + d + 3;
    let suffix_at = |j: usize| -> bool {
        matches!(chars.get(j).map(|c| lower(*c)), Some('a' | 'p'))
            && matches!(chars.get(j + 1).map(|c| lower(*c)), Some('m'))
            && boundary_after(chars, j + 2)
    };
    if suffix_at(end) {
        end += 2;
    } else if at(chars, end, ' ') && suffix_at(end + 1) {
        end += 3;
    }
    boundary_after(chars, end).then_some(end)
}

struct NumberToken {
    span: Span,
    value: f64,
    explicit_sign: bool,
}

/// Decimal number with optional sign, thousands separators and `%`.
fn scan_number(chars: &[char], i: usize) -> Option<NumberToken> {
    let (signed, digits_at) = match chars.get(i) {
        Some('+' | '-') => {
            let ok_prefix = i == 0 || chars[i - 1].is_whitespace() || chars[i - 1] == '(';
            if !ok_prefix {
                return None;
            }
            (true, i + 1)
        }
        _ => (false, i),
    };
    if !signed && (!boundary_before(chars, i) || (i > 0 && matches!(chars[i - 1], '.' | ',' | ':' | '/'))) {
        return None;
    }
    let lead = run_digits(chars, digits_at);
    if lead == 0 {
        return None;
    }
    let mut j = digits_at + lead;
    if lead <= 3 {
        while at(chars, j, ',') && run_digits(chars, j + 1) == 3 && !chars.get(j + 4).is_some_and(|c| c.is_ascii_digit()) {
            j += 4;
        }
    }
    if at(chars, j, '.') {
        let frac = run_digits(chars, j + 1);
        if frac > 0 {
            j += 1 + frac;
        }
    }
    if at(chars, j, '%') {
        j += 1;
    }
    if !boundary_after(chars, j) {
        return None;
    }
    let raw: String = chars[digits_at..j]
        .iter()
        .filter(|c| **c != ',' && **c != '%')
        .collect();
    let mut value: f64 = raw.parse().ok()?;
    if chars[i] == '-' {
        value = -value;
    }
    Some(NumberToken {
        span: Span::new(i, j),
        value,
        explicit_sign: signed,
    })
}

/// The word immediately before position `i`, skipping whitespace and
/// currency marks, lowercased.
fn previous_word(chars: &[char], i: usize) -> (String, usize) {
    let mut j = i;
    while j > 0 && (chars[j - 1].is_whitespace() || chars[j - 1] == '$') {
        j -= 1;
    }
    let end = j;
    while j > 0 && chars[j - 1].is_alphabetic() {
        j -= 1;
    }
    (chars[j..end].iter().map(|c| lower(*c)).collect(), j)
}

/// Sign implied by a change cue word governing the number at `i`. A single
/// intervening "by" is allowed ("fell by 0.2").
fn cue_sign(chars: &[char], i: usize) -> Option<f64> {
    let (mut word, start) = previous_word(chars, i);
    if word == "by" {
        word = previous_word(chars, start).0;
    }
    if UP_CUES.contains(&word.as_str()) {
        Some(1.0)
    } else if DOWN_CUES.contains(&word.as_str()) {
        Some(-1.0)
    } else {
        None
    }
}

/// Find symbols, numbers, changes, dates and times in `document`.
///
/// Date and time tokens suppress any plain-number reading of their digits,
/// and numbers inside a symbol alias are not reported as values.
pub fn annotate_entities(document: &Document, symbols: &SymbolTable) -> Vec<EntitySpan> {
    let chars = document.chars();
    let lowered: Vec<char> = chars.iter().map(|c| lower(*c)).collect();
    let mut out = Vec::new();
    let mut blocked = vec![false; chars.len()];

    for (span, symbol) in AliasMatcher::new(symbols).find_all(&lowered) {
        blocked[span.start..span.end].fill(true);
        out.push(EntitySpan {
            entity_type: EntityType::TsSymbol,
            span,
            normalized: Normalized::Text(symbol),
        });
    }

    let mut i = 0;
    while i < chars.len() {
        if blocked[i] {
            i += 1;
            continue;
        }
        let found = scan_date(&chars, i)
            .map(|end| (EntityType::Date, end))
            .or_else(|| scan_time(&chars, i).map(|end| (EntityType::Time, end)));
        match found {
            Some((ty, end)) if !blocked[i..end].iter().any(|b| *b) => {
                blocked[i..end].fill(true);
                out.push(EntitySpan {
                    entity_type: ty,
                    span: Span::new(i, end),
                    normalized: Normalized::Text(chars[i..end].iter().collect()),
                });
                i = end;
            }
            _ => i += 1,
        }
    }

    let mut i = 0;
    while i < chars.len() {
        if blocked[i] {
            i += 1;
            continue;
        }
        let Some(tok) = scan_number(&chars, i) else {
            i += 1;
            continue;
        };
        if blocked[tok.span.start..tok.span.end].iter().any(|b| *b) {
            i += 1;
            continue;
        }
        out.push(EntitySpan {
            entity_type: EntityType::NumericValue,
            span: tok.span,
            normalized: Normalized::Number(tok.value),
        });
        let change = if tok.explicit_sign {
            Some(tok.value)
        } else {
            cue_sign(&chars, tok.span.start).map(|sign| sign * tok.value)
        };
        if let Some(v) = change {
            out.push(EntitySpan {
                entity_type: EntityType::ChangeValue,
                span: tok.span,
                normalized: Normalized::Number(v),
            });
        }
        i = tok.span.end;
    }

    out.sort_by(|a, b| {
        (a.span.start, a.span.end, a.entity_type).cmp(&(b.span.start, b.span.end, b.entity_type))
    });
    out
}

/// Pair every symbol with every value in range, drop pairs that fail the
/// constraints, and attach the network's section window.
///
/// Output is ordered by symbol start, then value start, then kind.
pub fn generate_candidates(
    document: &Document,
    entities: &[EntitySpan],
    constraints: &ConstraintSet,
    section_width: usize,
) -> Vec<ExtractionCandidate> {
    let text_len = document.text.chars().count();
    let symbols = entities.iter().filter(|e| e.entity_type == EntityType::TsSymbol);
    let mut out = Vec::new();
    for sym in symbols {
        let Some(name) = sym.text() else { continue };
        for val in entities {
            let kind = match val.entity_type {
                EntityType::NumericValue => RelationKind::TickAbs,
                EntityType::ChangeValue => RelationKind::TickRel,
                _ => continue,
            };
            let Some(value) = val.number() else { continue };
            if sym.span.gap(&val.span) > constraints.max_pair_distance {
                continue;
            }
            let Ok(section_span) = section_window(sym.span, val.span, text_len, section_width) else {
                continue;
            };
            let cand = ExtractionCandidate {
                doc_id: document.doc_id.clone(),
                timestamp: document.timestamp,
                kind,
                symbol: name.to_owned(),
                value,
                symbol_span: sym.span,
                value_span: val.span,
                section_span,
                aux: BTreeMap::new(),
            };
            if apply_constraints(&cand, constraints) {
                out.push(cand);
            }
        }
    }
    out.sort_by(|a, b| {
        (a.symbol_span.start, a.value_span.start, a.kind).cmp(&(b.symbol_span.start, b.value_span.start, b.kind))
    });
    out
}

/// Convenience: annotate then generate.
pub fn parse_document(
    document: &Document,
    symbols: &SymbolTable,
    constraints: &ConstraintSet,
    section_width: usize,
) -> (Vec<EntitySpan>, Vec<ExtractionCandidate>) {
    let entities = annotate_entities(document, symbols);
    let candidates = generate_candidates(document, &entities, constraints, section_width);
    (entities, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::SymbolInfo;

    fn table() -> SymbolTable {
        SymbolTable::new(vec![
            SymbolInfo {
                symbol: "US_Unemployment".into(),
                aliases: vec!["US unemployment".into(), "unemployment".into()],
                min_value: 0.0,
                max_value: 100.0,
                rel_min: -100.0,
                rel_max: 100.0,
            },
            SymbolInfo {
                symbol: "Canada_Unemployment".into(),
                aliases: vec!["Canada unemployment".into()],
                min_value: 0.0,
                max_value: 100.0,
                rel_min: -100.0,
                rel_max: 100.0,
            },
        ])
        .unwrap()
    }

    fn doc(text: &str) -> Document {
        Document::new("d0", text, 100).unwrap()
    }

    fn types(ents: &[EntitySpan]) -> Vec<(EntityType, usize, usize)> {
        ents.iter().map(|e| (e.entity_type, e.span.start, e.span.end)).collect()
    }

    #[test]
    fn annotates_symbol_and_percent_value() {
        let ents = annotate_entities(&doc("US unemployment at 4.9%"), &table());
        assert_eq!(
            types(&ents),
            vec![(EntityType::TsSymbol, 0, 15), (EntityType::NumericValue, 19, 23)]
        );
        assert_eq!(ents[0].text(), Some("US_Unemployment"));
        assert_eq!(ents[1].number(), Some(4.9));
    }

    #[test]
    fn text_without_numbers() {
        assert!(annotate_entities(&doc("no numbers here"), &table()).is_empty());
        let ents = annotate_entities(&doc("unemployment is a worry"), &table());
        assert_eq!(types(&ents), vec![(EntityType::TsSymbol, 0, 12)]);
    }

    #[test]
    fn empty_document_rejected() {
        assert!(Document::new("d", "", 0).is_err());
    }

    #[test]
    fn dates_and_times_suppress_numbers() {
        let ents = annotate_entities(&doc("meeting 2024-01-05 at 09:30"), &table());
        assert_eq!(types(&ents), vec![(EntityType::Date, 8, 18), (EntityType::Time, 22, 27)]);
        let ents = annotate_entities(&doc("on 01/05/2024 at 8:30 am"), &table());
        assert_eq!(types(&ents), vec![(EntityType::Date, 3, 13), (EntityType::Time, 17, 24)]);
        let ents = annotate_entities(&doc("by 8:30pm"), &table());
        assert_eq!(types(&ents), vec![(EntityType::Time, 3, 9)]);
    }

    #[test]
    fn numbers_with_separators_and_signs() {
        let ents = annotate_entities(&doc("gold 1,850.40 and -0.2% plus +3"), &table());
        let nums: Vec<_> = ents
            .iter()
            .filter(|e| e.entity_type == EntityType::NumericValue)
            .map(|e| (e.span.start, e.span.end, e.number().unwrap()))
            .collect();
        assert_eq!(nums, vec![(5, 13, 1850.4), (18, 23, -0.2), (29, 31, 3.0)]);
        let changes: Vec<_> = ents
            .iter()
            .filter(|e| e.entity_type == EntityType::ChangeValue)
            .map(|e| e.number().unwrap())
            .collect();
        assert_eq!(changes, vec![-0.2, 3.0]);
    }

    #[test]
    fn embedded_digits_are_not_numbers() {
        let ents = annotate_entities(&doc("Q3 results, 3rd time, 263K jobs, x2"), &table());
        assert!(ents.is_empty(), "{ents:?}");
    }

    #[test]
    fn change_cues_sign_values() {
        let ents = annotate_entities(&doc("unemployment fell 0.2% to 4.9%"), &table());
        let changes: Vec<_> = ents
            .iter()
            .filter(|e| e.entity_type == EntityType::ChangeValue)
            .map(|e| (e.span.start, e.number().unwrap()))
            .collect();
        assert_eq!(changes, vec![(18, -0.2)]);
        let ents = annotate_entities(&doc("Brent rose by $1.25"), &table());
        let ch: Vec<_> = ents
            .iter()
            .filter(|e| e.entity_type == EntityType::ChangeValue)
            .map(|e| e.number().unwrap())
            .collect();
        assert_eq!(ch, vec![1.25]);
    }

    #[test]
    fn longest_alias_wins() {
        let ents = annotate_entities(&doc("Canada unemployment and unemployment"), &table());
        let syms: Vec<_> = ents.iter().map(|e| (e.span.start, e.text().unwrap().to_owned())).collect();
        assert_eq!(
            syms,
            vec![(0, "Canada_Unemployment".to_owned()), (24, "US_Unemployment".to_owned())]
        );
        // no match inside a longer word
        assert!(annotate_entities(&doc("unemploymentish"), &table()).is_empty());
    }

    #[test]
    fn case_insensitive_alias() {
        let ents = annotate_entities(&doc("US UNEMPLOYMENT 5%"), &table());
        assert_eq!(ents[0].text(), Some("US_Unemployment"));
    }

    fn constraints() -> ConstraintSet {
        ConstraintSet::from_symbols(&table(), DEFAULT_MAX_PAIR_DISTANCE)
    }

    #[test]
    fn single_pair_gives_one_candidate() {
        let d = doc("unemployment rate at 4.9");
        let ents = annotate_entities(&d, &table());
        let c = generate_candidates(&d, &ents, &constraints(), 200);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, RelationKind::TickAbs);
        assert_eq!(c[0].value, 4.9);
        assert_eq!(c[0].section_span, Span::new(0, 24));
    }

    #[test]
    fn ambiguous_document_pairs_exhaustively() {
        let d = doc("Canada unemployment and US unemployment at 5.1%");
        let ents = annotate_entities(&d, &table());
        let c = generate_candidates(&d, &ents, &constraints(), 200);
        let syms: Vec<_> = c.iter().map(|c| c.symbol.as_str()).collect();
        assert_eq!(syms, vec!["Canada_Unemployment", "US_Unemployment"]);
    }

    #[test]
    fn rel_and_abs_from_change_sentence() {
        let d = doc("unemployment fell 0.2% to 4.9%");
        let ents = annotate_entities(&d, &table());
        let c = generate_candidates(&d, &ents, &constraints(), 200);
        let got: Vec<_> = c.iter().map(|c| (c.kind, c.value, c.value_span)).collect();
        assert_eq!(
            got,
            vec![
                (RelationKind::TickAbs, 0.2, Span::new(18, 22)),
                (RelationKind::TickRel, -0.2, Span::new(18, 22)),
                (RelationKind::TickAbs, 4.9, Span::new(26, 30)),
            ]
        );
        // An explicit negative reading is an abs candidate only if allowed.
        let d = doc("unemployment -0.2% to 4.9%");
        let ents = annotate_entities(&d, &table());
        let c = generate_candidates(&d, &ents, &constraints(), 200);
        assert!(!c.iter().any(|c| c.kind == RelationKind::TickAbs && c.value < 0.0));
        assert!(c.iter().any(|c| c.kind == RelationKind::TickRel && c.value == -0.2));
    }

    #[test]
    fn window_limits_pairing() {
        let filler = "x".repeat(170);
        let d = doc(&format!("unemployment {filler} 4.9"));
        let ents = annotate_entities(&d, &table());
        assert!(generate_candidates(&d, &ents, &constraints(), 200).is_empty());
    }

    fn cand(value: f64, kind: RelationKind) -> ExtractionCandidate {
        ExtractionCandidate {
            doc_id: "d".into(),
            timestamp: 0,
            kind,
            symbol: "US_Unemployment".into(),
            value,
            symbol_span: Span::new(0, 5),
            value_span: Span::new(10, 13),
            section_span: Span::new(0, 13),
            aux: BTreeMap::new(),
        }
    }

    #[test]
    fn constraint_examples() {
        let cs = constraints();
        assert!(!apply_constraints(&cand(-0.2, RelationKind::TickAbs), &cs));
        assert!(apply_constraints(&cand(4.9, RelationKind::TickAbs), &cs));
        assert!(apply_constraints(&cand(0.0, RelationKind::TickAbs), &cs));
        assert!(apply_constraints(&cand(100.0, RelationKind::TickAbs), &cs));
        assert!(apply_constraints(&cand(-0.2, RelationKind::TickRel), &cs));
        let mut unknown = cand(-1e9, RelationKind::TickAbs);
        unknown.symbol = "Other".into();
        assert!(apply_constraints(&unknown, &cs));
        let mut far = cand(4.9, RelationKind::TickAbs);
        far.value_span = Span::new(200, 203);
        assert!(!apply_constraints(&far, &cs));
    }

    #[test]
    fn constraint_json_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        constraints().save(&path).unwrap();
        let raw: serde_json::Value = io::read_json(&path).unwrap();
        assert_eq!(raw["US_Unemployment"]["abs"], serde_json::json!([0.0, 100.0]));
        let back = ConstraintSet::load(&path, 160).unwrap();
        assert_eq!(back, constraints());
    }
}
