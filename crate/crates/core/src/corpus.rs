//! Seeded generator of short financial-news style documents with exact
//! ground-truth relations, plus the reference store they are checked
//! against.
//!
//! Every document draws from its own generator, seeded from the corpus
//! seed and the document index, so appending documents leaves earlier ones
//! untouched. Series values evolve forward through the documents; each
//! reported level becomes a store point at the document's timestamp.
//! Supervision noise is applied to the store copy only, and every
//! perturbed point is written to the ledger.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::parser::Document;
use crate::symbols::{SymbolInfo, SymbolTable};
use crate::tsdb::TimeSeriesStore;
use crate::types::{RelationKind, Span};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub num_documents: usize,
    /// Probability a document carries extra numeric clutter.
    pub distractor_rate: f64,
    /// Fraction of store points that are perturbed.
    pub db_noise_rate: f64,
    /// Probability a document names a second, same-family symbol near the
    /// value.
    pub ambiguity_rate: f64,
    /// Scale of the relative perturbation applied to noisy points.
    pub value_jitter: f64,
    /// Probability the reported level has a misplaced decimal point.
    pub typo_rate: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            num_documents: 5000,
            distractor_rate: 0.5,
            db_noise_rate: 0.05,
            ambiguity_rate: 0.3,
            value_jitter: 0.3,
            typo_rate: 0.02,
            seed: 42,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_documents == 0 {
            return Err(Error::InvalidConfig("num_documents must be at least 1".into()));
        }
        for (name, r) in [
            ("distractor_rate", self.distractor_rate),
            ("db_noise_rate", self.db_noise_rate),
            ("ambiguity_rate", self.ambiguity_rate),
            ("typo_rate", self.typo_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidConfig(format!("{name} = {r} is outside [0, 1]")));
            }
        }
        if !(self.value_jitter >= 0.0) || !self.value_jitter.is_finite() {
            return Err(Error::InvalidConfig("value_jitter must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRelation {
    pub kind: RelationKind,
    pub symbol: String,
    pub value: f64,
    pub symbol_span: Span,
    pub value_span: Span,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDocument {
    pub doc_id: String,
    pub text: String,
    pub timestamp: i64,
    pub ground_truth: Vec<GroundTruthRelation>,
}

impl SyntheticDocument {
    pub fn to_document(&self) -> Document {
        Document {
            doc_id: self.doc_id.clone(),
            text: self.text.clone(),
            timestamp: self.timestamp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedPoint {
    pub symbol: String,
    pub timestamp: i64,
    pub clean_value: f64,
    pub stored_value: f64,
}

/// What the generator did, for exact accounting in tests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseLedger {
    pub total_points: usize,
    pub perturbed: Vec<PerturbedPoint>,
    pub ambiguous_docs: Vec<String>,
    pub distractor_docs: Vec<String>,
    pub typo_docs: Vec<String>,
    pub distractor_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub documents: Vec<SyntheticDocument>,
    pub store: TimeSeriesStore,
    pub symbols: SymbolTable,
    pub ledger: NoiseLedger,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub relations: BTreeMap<RelationKind, usize>,
    pub ambiguous_documents: usize,
    pub typo_documents: usize,
    /// Distractor clauses per document.
    pub distractor_density: f64,
    pub store_points: usize,
    pub perturbed_points: usize,
    pub noise_fraction: f64,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut relations = BTreeMap::from([(RelationKind::TickAbs, 0), (RelationKind::TickRel, 0)]);
    for gt in corpus.documents.iter().flat_map(|d| &d.ground_truth) {
        *relations.entry(gt.kind).or_default() += 1;
    }
    let l = &corpus.ledger;
    CorpusStats {
        documents: corpus.documents.len(),
        relations,
        ambiguous_documents: l.ambiguous_docs.len(),
        typo_documents: l.typo_docs.len(),
        distractor_density: l.distractor_count as f64 / corpus.documents.len().max(1) as f64,
        store_points: l.total_points,
        perturbed_points: l.perturbed.len(),
        noise_fraction: if l.total_points == 0 {
            0.0
        } else {
            l.perturbed.len() as f64 / l.total_points as f64
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Unit {
    Percent,
    Dollar,
    Plain,
}

struct SeriesSpec {
    symbol: &'static str,
    aliases: &'static [&'static str],
    family: usize,
    decimals: usize,
    unit: Unit,
    thousands: bool,
    init: (f64, f64),
    bounds: (f64, f64),
    abs: (f64, f64),
    rel: (f64, f64),
}

const CATALOG: &[SeriesSpec] = &[
    SeriesSpec { symbol: "US_Unemployment", aliases: &["US unemployment", "U.S. jobless rate", "unemployment"], family: 0, decimals: 1, unit: Unit::Percent, thousands: false, init: (3.5, 8.5), bounds: (2.5, 12.0), abs: (0.0, 100.0), rel: (-100.0, 100.0) },
    SeriesSpec { symbol: "Canada_Unemployment", aliases: &["Canada unemployment", "Canadian jobless rate"], family: 0, decimals: 1, unit: Unit::Percent, thousands: false, init: (3.5, 8.5), bounds: (2.5, 12.0), abs: (0.0, 100.0), rel: (-100.0, 100.0) },
    SeriesSpec { symbol: "UK_Unemployment", aliases: &["UK unemployment", "British jobless rate"], family: 0, decimals: 1, unit: Unit::Percent, thousands: false, init: (3.5, 8.5), bounds: (2.5, 12.0), abs: (0.0, 100.0), rel: (-100.0, 100.0) },
    SeriesSpec { symbol: "Germany_Unemployment", aliases: &["German unemployment", "German jobless rate"], family: 0, decimals: 1, unit: Unit::Percent, thousands: false, init: (3.5, 8.5), bounds: (2.5, 12.0), abs: (0.0, 100.0), rel: (-100.0, 100.0) },
    SeriesSpec { symbol: "US_CPI", aliases: &["US inflation", "US CPI"], family: 1, decimals: 1, unit: Unit::Percent, thousands: false, init: (1.5, 7.0), bounds: (0.8, 12.0), abs: (-5.0, 30.0), rel: (-10.0, 10.0) },
    SeriesSpec { symbol: "EZ_CPI", aliases: &["euro zone inflation", "eurozone CPI"], family: 1, decimals: 1, unit: Unit::Percent, thousands: false, init: (1.5, 7.0), bounds: (0.8, 12.0), abs: (-5.0, 30.0), rel: (-10.0, 10.0) },
    SeriesSpec { symbol: "Japan_CPI", aliases: &["Japan inflation", "Japanese CPI"], family: 1, decimals: 1, unit: Unit::Percent, thousands: false, init: (1.5, 7.0), bounds: (0.8, 12.0), abs: (-5.0, 30.0), rel: (-10.0, 10.0) },
    SeriesSpec { symbol: "Brent", aliases: &["Brent crude", "Brent"], family: 2, decimals: 2, unit: Unit::Dollar, thousands: false, init: (60.0, 100.0), bounds: (30.0, 150.0), abs: (0.0, 500.0), rel: (-100.0, 100.0) },
    SeriesSpec { symbol: "WTI", aliases: &["WTI crude", "WTI"], family: 2, decimals: 2, unit: Unit::Dollar, thousands: false, init: (60.0, 100.0), bounds: (30.0, 150.0), abs: (0.0, 500.0), rel: (-100.0, 100.0) },
    SeriesSpec { symbol: "Gold", aliases: &["spot gold", "gold"], family: 3, decimals: 2, unit: Unit::Dollar, thousands: true, init: (1700.0, 2100.0), bounds: (900.0, 4000.0), abs: (0.0, 10000.0), rel: (-1000.0, 1000.0) },
    SeriesSpec { symbol: "Silver", aliases: &["spot silver", "silver"], family: 3, decimals: 2, unit: Unit::Dollar, thousands: false, init: (20.0, 28.0), bounds: (10.0, 60.0), abs: (0.0, 1000.0), rel: (-50.0, 50.0) },
    SeriesSpec { symbol: "SPX", aliases: &["S&P index", "SPX"], family: 4, decimals: 1, unit: Unit::Plain, thousands: true, init: (4000.0, 4800.0), bounds: (2000.0, 9000.0), abs: (0.0, 100000.0), rel: (-5000.0, 5000.0) },
    SeriesSpec { symbol: "NDX", aliases: &["Nasdaq composite", "Nasdaq"], family: 4, decimals: 1, unit: Unit::Plain, thousands: true, init: (12000.0, 15000.0), bounds: (6000.0, 30000.0), abs: (0.0, 100000.0), rel: (-5000.0, 5000.0) },
    SeriesSpec { symbol: "EURUSD", aliases: &["EUR/USD", "euro-dollar"], family: 5, decimals: 4, unit: Unit::Plain, thousands: false, init: (1.05, 1.15), bounds: (0.8, 1.6), abs: (0.0, 10.0), rel: (-1.0, 1.0) },
    SeriesSpec { symbol: "GBPUSD", aliases: &["GBP/USD", "cable"], family: 5, decimals: 4, unit: Unit::Plain, thousands: false, init: (1.20, 1.30), bounds: (0.9, 1.8), abs: (0.0, 10.0), rel: (-1.0, 1.0) },
];

/// The built-in symbol table the generator writes.
pub fn default_symbol_table() -> SymbolTable {
    let entries = CATALOG
        .iter()
        .map(|s| SymbolInfo {
            symbol: s.symbol.to_owned(),
            aliases: s.aliases.iter().map(|a| a.to_string()).collect(),
            min_value: s.abs.0,
            max_value: s.abs.1,
            rel_min: s.rel.0,
            rel_max: s.rel.1,
        })
        .collect();
    SymbolTable::new(entries).expect("built-in catalog is valid")
}

// Placeholders: {A} {B} symbol aliases, {v} level, {d} unsigned change,
// {sd} signed change, {rose} {up} {gained} direction words matching the
// change sign, {month} {period} filler.
const ABS_TEMPLATES: &[&str] = &[
    "{A} at {v}",
    "{A} came in at {v}",
    "{A} printed {v}",
    "{A} {v}",
    "Latest {A}: {v}",
    "{A} stands at {v}",
    "{A} was {v} in {month}",
    "{A} holds at {v}",
    "{v} for {A} this {period}",
    "{A} hits {v}",
    "Reading of {v} for {A}",
    "{A} comes in at {v} for {month}",
];

const BOTH_TEMPLATES: &[&str] = &[
    "{A} {rose} {d} to {v}",
    "{A} {up} {d} at {v}",
    "{A} at {v}, {up} {d}",
    "{A} {gained} {d}, now {v}",
    "{A} {rose} by {d} to {v}",
    "{A} {v}, {up} {d} on the {period}",
];

const REL_TEMPLATES: &[&str] = &[
    "{A} {rose} {d}",
    "{A} {up} {d} on the {period}",
    "{A} {gained} {d} this week",
    "{A} {sd} m/m",
    "{A} {rose} by {d}",
    "{A} change: {sd}",
];

const AMBIGUOUS_ABS_TEMPLATES: &[&str] = &[
    "{A} at {v}, {B} not yet out",
    "{B} due later; {A} at {v}",
    "{A}, unlike {B}, came in at {v}",
    "{v} for {A}, ahead of {B}",
    "While {B} lagged, {A} printed {v}",
    "Compared with {B}, {A} at {v}",
    "{A} hit {v} while {B} was flat",
    "At {v}, {A} topped {B}",
    "{B} vs {A}: {v} for the latter",
    "{A} vs {B}: {v} for the former",
];

const AMBIGUOUS_BOTH_TEMPLATES: &[&str] = &[
    "{A} {rose} {d} to {v} while {B} was unchanged",
    "{B} steady, {A} {up} {d} at {v}",
    "{A}, not {B}, {rose} {d} to {v}",
];

const AMBIGUOUS_REL_TEMPLATES: &[&str] = &[
    "{A} {rose} {d}, {B} unchanged",
    "{B} flat as {A} {gained} {d}",
    "{A}, unlike {B}, {rose} {d}",
];

const EXPECTED_CLAUSES: &[&str] = &["vs {e} expected", "consensus {e}", "economists expected {e}", "forecast was {e}"];
const PRIOR_CLAUSES: &[&str] = &["prior {p}", "previous reading {p}", "revised from {p}", "last time {p}"];
const COUNT_CLAUSES: &[&str] = &["{n} economists polled", "survey of {n} firms", "{n} analysts surveyed", "{n} states reporting"];
const DATE_CLAUSES: &[&str] = &["released {date}", "data as of {date}", "for {date}"];
const TIME_CLAUSES: &[&str] = &["at {time} ET", "{time} release", "out {time}"];
const PREFIXES: &[&str] = &["", "", "", "BREAKING: ", "#macro ", "Update: ", "FLASH ", "* "];
const SUFFIXES: &[&str] = &[" — wire", " …", " (€ area watch)", " → more soon"];
const MONTHS: &[&str] = &["January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November", "December"];
const PERIODS: &[&str] = &["month", "quarter", "week"];

const BASE_TIMESTAMP: i64 = 1_600_000_000;

#[derive(Clone, Copy, PartialEq, Eq)]
enum RelSet {
    Abs,
    Rel,
    Both,
}

#[derive(Clone, Copy)]
enum Clutter {
    Expected,
    Prior,
    Count,
    Date,
    Time,
    Symbolic,
}

const CLUTTER: [Clutter; 6] = [
    Clutter::Expected,
    Clutter::Prior,
    Clutter::Count,
    Clutter::Date,
    Clutter::Time,
    Clutter::Symbolic,
];

/// Builds text while recording the character spans of marked pieces.
#[derive(Default)]
struct TextBuilder {
    text: String,
    len: usize,
    marks: BTreeMap<&'static str, Span>,
}

impl TextBuilder {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.len += s.chars().count();
    }

    fn push_marked(&mut self, key: &'static str, s: &str) {
        let start = self.len;
        self.push(s);
        self.marks.insert(key, Span::new(start, self.len));
    }
}

/// Expand `{name}` placeholders through `fill`, which returns an unmarked
/// prefix, the text and whether it should be marked.
fn render(b: &mut TextBuilder, template: &str, fill: &mut dyn FnMut(&str) -> (&'static str, String, Option<&'static str>)) {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        b.push(&rest[..open]);
        let close = rest[open..].find('}').expect("unterminated placeholder") + open;
        let (prefix, text, mark) = fill(&rest[open + 1..close]);
        b.push(prefix);
        match mark {
            Some(key) => b.push_marked(key, &text),
            None => b.push(&text),
        }
        rest = &rest[close + 1..];
    }
    b.push(rest);
}

fn round_to(v: f64, decimals: usize) -> f64 {
    format!("{v:.decimals$}").parse().expect("formatted float parses")
}

fn with_thousands(int_part: &str) -> String {
    let bytes = int_part.as_bytes();
    let mut out = String::new();
    for (i, c) in bytes.iter().enumerate() {
        if i > 0 && (bytes.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(*c as char);
    }
    out
}

/// Number text without the unit prefix; `%` is part of the token.
fn format_number(spec: &SeriesSpec, v: f64) -> String {
    let decimals = spec.decimals;
    let raw = format!("{:.decimals$}", v.abs());
    let body = if spec.thousands {
        let (int, frac) = raw.split_once('.').unwrap_or((&raw, ""));
        let int = with_thousands(int);
        if frac.is_empty() {
            int
        } else {
            format!("{int}.{frac}")
        }
    } else {
        raw
    };
    if spec.unit == Unit::Percent {
        format!("{body}%")
    } else {
        body
    }
}

fn unit_prefix(spec: &SeriesSpec) -> &'static str {
    if spec.unit == Unit::Dollar {
        "$"
    } else {
        ""
    }
}

/// Parse a token as the parser would: drop separators and `%`.
fn parse_number(token: &str) -> f64 {
    let cleaned: String = token.chars().filter(|c| *c != ',' && *c != '%').collect();
    cleaned.parse().expect("generated number parses")
}

fn doc_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 over (seed, index)
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One step of a series: a relative move of 2% to 12%, reflected at the
/// bounds, rounded, and never zero after rounding.
fn next_level(spec: &SeriesSpec, prev: f64, rng: &mut ChaCha8Rng) -> f64 {
    let step: f64 = rng.gen_range(0.02..0.12);
    let up = rng.gen_bool(0.5);
    let mut next = prev * if up { 1.0 + step } else { 1.0 - step };
    if next > spec.bounds.1 || next < spec.bounds.0 {
        next = prev * if up { 1.0 - step } else { 1.0 + step };
    }
    let mut next = round_to(next, spec.decimals);
    if next == prev {
        let unit = 10f64.powi(-(spec.decimals as i32));
        next = round_to(prev + if up { unit } else { -unit }, spec.decimals);
    }
    next
}

struct Generator<'a> {
    cfg: &'a CorpusConfig,
    levels: Vec<f64>,
    store: TimeSeriesStore,
    ledger: NoiseLedger,
}

impl Generator<'_> {
    fn add_point(&mut self, symbol: &str, timestamp: i64, clean: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let perturb = rng.gen_bool(self.cfg.db_noise_rate);
        let u = 1.0 - rng.gen::<f64>();
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let stored = if perturb {
            let v = clean * (1.0 + sign * u * self.cfg.value_jitter);
            self.ledger.perturbed.push(PerturbedPoint {
                symbol: symbol.to_owned(),
                timestamp,
                clean_value: clean,
                stored_value: v,
            });
            v
        } else {
            clean
        };
        self.ledger.total_points += 1;
        self.store.insert(symbol, timestamp, stored)
    }

    fn document(&mut self, index: usize, timestamp: i64, rng: &mut ChaCha8Rng) -> Result<SyntheticDocument> {
        let doc_id = format!("doc-{index:06}");
        let a_idx = rng.gen_range(0..CATALOG.len());
        let a = &CATALOG[a_idx];
        let relset = match rng.gen::<f64>() {
            x if x < 0.5 => RelSet::Abs,
            x if x < 0.65 => RelSet::Rel,
            _ => RelSet::Both,
        };
        let ambiguous = rng.gen_bool(self.cfg.ambiguity_rate);
        let b = {
            let others: Vec<&SeriesSpec> = CATALOG.iter().filter(|s| s.family == a.family && s.symbol != a.symbol).collect();
            *others.choose(rng).expect("every family has two members")
        };
        let typo = relset != RelSet::Rel && rng.gen_bool(self.cfg.typo_rate);

        let prev = self.levels[a_idx];
        let level = next_level(a, prev, rng);
        self.levels[a_idx] = level;
        let change = round_to(level - prev, a.decimals);

        let templates = match (relset, ambiguous) {
            (RelSet::Abs, false) => ABS_TEMPLATES,
            (RelSet::Both, false) => BOTH_TEMPLATES,
            (RelSet::Rel, false) => REL_TEMPLATES,
            (RelSet::Abs, true) => AMBIGUOUS_ABS_TEMPLATES,
            (RelSet::Both, true) => AMBIGUOUS_BOTH_TEMPLATES,
            (RelSet::Rel, true) => AMBIGUOUS_REL_TEMPLATES,
        };
        let template = *templates.choose(rng).unwrap();
        let a_alias = *a.aliases.choose(rng).unwrap();
        let b_alias = *b.aliases.choose(rng).unwrap();
        let month = *MONTHS.choose(rng).unwrap();
        let period = *PERIODS.choose(rng).unwrap();
        let shown_level = if typo { level * 10.0 } else { level };
        let level_text = format_number(a, shown_level);
        let change_text = format_number(a, change);
        let signed_text = format!("{}{}", if change < 0.0 { "-" } else { "+" }, change_text);
        let rising = change > 0.0;

        let mut out = TextBuilder::default();
        out.push(PREFIXES.choose(rng).unwrap());
        render(&mut out, template, &mut |name| match name {
            "A" => ("", a_alias.to_owned(), Some("A")),
            "B" => ("", b_alias.to_owned(), Some("B")),
            "v" => (unit_prefix(a), level_text.clone(), Some("v")),
            "d" => (unit_prefix(a), change_text.clone(), Some("d")),
            "sd" => ("", signed_text.clone(), Some("d")),
            "rose" => ("", (if rising { "rose" } else { "fell" }).to_owned(), None),
            "up" => ("", (if rising { "up" } else { "down" }).to_owned(), None),
            "gained" => ("", (if rising { "gained" } else { "lost" }).to_owned(), None),
            "month" => ("", month.to_owned(), None),
            "period" => ("", period.to_owned(), None),
            other => panic!("unknown placeholder {other}"),
        });
        let mut clutter_count = 0;
        if rng.gen_bool(self.cfg.distractor_rate) {
            let n = rng.gen_range(1..=2);
            let picks: Vec<Clutter> = CLUTTER.choose_multiple(rng, n).copied().collect();
            for kind in picks {
                clutter_count += 1;
                out.push(if rng.gen_bool(0.5) { ", " } else { "; " });
                self.clutter(&mut out, kind, a, prev, level, rng);
            }
        }
        if rng.gen_bool(0.1) {
            out.push(SUFFIXES.choose(rng).unwrap());
        }

        if ambiguous {
            self.ledger.ambiguous_docs.push(doc_id.clone());
        }
        if clutter_count > 0 {
            self.ledger.distractor_docs.push(doc_id.clone());
            self.ledger.distractor_count += clutter_count;
        }
        if typo {
            self.ledger.typo_docs.push(doc_id.clone());
        }

        self.add_point(a.symbol, timestamp, level, rng)?;

        let a_span = out.marks["A"];
        let mut ground_truth = Vec::new();
        if relset != RelSet::Rel && !typo {
            let span = out.marks["v"];
            ground_truth.push(GroundTruthRelation {
                kind: RelationKind::TickAbs,
                symbol: a.symbol.to_owned(),
                value: parse_number(&level_text),
                symbol_span: a_span,
                value_span: span,
            });
        }
        if relset != RelSet::Abs {
            ground_truth.push(GroundTruthRelation {
                kind: RelationKind::TickRel,
                symbol: a.symbol.to_owned(),
                value: change.signum() * parse_number(&change_text),
                symbol_span: a_span,
                value_span: out.marks["d"],
            });
        }
        ground_truth.sort_by_key(|g| g.value_span.start);

        Ok(SyntheticDocument {
            doc_id,
            text: out.text,
            timestamp,
            ground_truth,
        })
    }

    fn clutter(&mut self, out: &mut TextBuilder, kind: Clutter, a: &SeriesSpec, prev: f64, level: f64, rng: &mut ChaCha8Rng) {
        let (templates, text): (&[&str], String) = match kind {
            Clutter::Expected => {
                let dev: f64 = rng.gen_range(0.02..0.20);
                let e = level * if rng.gen_bool(0.5) { 1.0 + dev } else { 1.0 - dev };
                (EXPECTED_CLAUSES, format!("{}{}", unit_prefix(a), format_number(a, e)))
            }
            Clutter::Prior => (PRIOR_CLAUSES, format!("{}{}", unit_prefix(a), format_number(a, prev))),
            Clutter::Count => (COUNT_CLAUSES, rng.gen_range(10..90).to_string()),
            Clutter::Date => {
                let (y, m, d) = (rng.gen_range(2019..2025), rng.gen_range(1..=12), rng.gen_range(1..=28));
                let date = if rng.gen_bool(0.5) {
                    format!("{y}-{m:02}-{d:02}")
                } else {
                    format!("{m:02}/{d:02}/{y}")
                };
                (DATE_CLAUSES, date)
            }
            Clutter::Time => {
                let (h, m) = (rng.gen_range(1..=12), [0, 15, 30, 45][rng.gen_range(0..4)]);
                let t = match rng.gen_range(0..3) {
                    0 => format!("{h:02}:{m:02}"),
                    1 => format!("{h}:{m:02}am"),
                    _ => format!("{h}:{m:02} pm"),
                };
                (TIME_CLAUSES, t)
            }
            Clutter::Symbolic => {
                out.push(["€ zone watch", "→ thread", "via desk ✓"][rng.gen_range(0..3)]);
                return;
            }
        };
        let template = *templates.choose(rng).unwrap();
        render(out, template, &mut |_| ("", text.clone(), None));
    }
}

/// Generate documents, the store and the symbol table from `config`.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Corpus> {
    config.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(doc_seed(config.seed, u64::MAX));
    let mut gen = Generator {
        cfg: config,
        levels: Vec::with_capacity(CATALOG.len()),
        store: TimeSeriesStore::new(),
        ledger: NoiseLedger::default(),
    };
    // Two seed points per series so change lookups always have history.
    for spec in CATALOG {
        let first = round_to(init_rng.gen_range(spec.init.0..spec.init.1), spec.decimals);
        let second = next_level(spec, first, &mut init_rng);
        gen.add_point(spec.symbol, BASE_TIMESTAMP - 2 * 86_400, first, &mut init_rng)?;
        gen.add_point(spec.symbol, BASE_TIMESTAMP - 86_400, second, &mut init_rng)?;
        gen.levels.push(second);
    }

    let mut documents = Vec::with_capacity(config.num_documents);
    let mut timestamp = BASE_TIMESTAMP;
    for i in 0..config.num_documents {
        let mut rng = ChaCha8Rng::seed_from_u64(doc_seed(config.seed, i as u64));
        timestamp += rng.gen_range(600..7200);
        documents.push(gen.document(i, timestamp, &mut rng)?);
    }
    Ok(Corpus {
        documents,
        store: gen.store,
        symbols: default_symbol_table(),
        ledger: gen.ledger,
    })
}

impl Corpus {
    /// Write the three interchange files and the ledger.
    pub fn save(&self, documents: &Path, store: &Path, symbols: &Path, ledger: Option<&Path>) -> Result<()> {
        io::write_jsonl(documents, &self.documents)?;
        self.store.save_csv(store)?;
        self.symbols.save(symbols)?;
        if let Some(path) = ledger {
            io::write_json(path, &self.ledger)?;
        }
        Ok(())
    }
}

pub fn load_documents(path: &Path) -> Result<Vec<SyntheticDocument>> {
    io::read_jsonl(path)
}
