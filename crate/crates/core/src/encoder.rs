//! Stage three, input side: per-character feature rows for the recurrent
//! network and the hashed document-level vector.
//!
//! Row layout (102 columns):
//!
//! ```text
//! [ char one-hot (95) | entity indicators (5) | candidate role (2) ]
//! ```
//!
//! The entity block marks every parser entity covering the character, in
//! `EntityType` order. The role block marks the candidate under evaluation:
//! column 100 is set on its symbol characters, column 101 on its value
//! characters. Change candidates additionally set column 100 on their value
//! characters, so an absolute and a change reading of the same token encode
//! differently.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::parser::{Document, EntitySpan, EntityType, ExtractionCandidate};
use crate::types::{RelationKind, Span};

pub const VOCAB_SIZE: usize = 94;
pub const OOV_INDEX: usize = 94;
pub const CHAR_BLOCK: usize = 95;
pub const ENTITY_BLOCK: usize = 5;
pub const ROLE_BLOCK: usize = 2;
/// Width of one character row.
pub const FEATURE_DIM: usize = CHAR_BLOCK + ENTITY_BLOCK + ROLE_BLOCK;

pub const ROLE_SYMBOL: usize = CHAR_BLOCK + ENTITY_BLOCK;
pub const ROLE_VALUE: usize = ROLE_SYMBOL + 1;

pub const DEFAULT_SECTION_WIDTH: usize = 200;
pub const DEFAULT_GLOBAL_DIM: usize = 512;
pub const DEFAULT_NGRAM_DIM: usize = 256;
pub const DEFAULT_HASH_SEED: u64 = 0x5eed_c4a2;

const PUNCT: &str = ".,;:!?'\"%$#@&*()[]{}<>+-=/\\_^";

/// The fixed 94-character alphabet; anything else maps to [`OOV_INDEX`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocabulary {
    chars: Vec<char>,
    ascii_index: [u8; 128],
}

impl Default for CharVocabulary {
    fn default() -> Self {
        let chars: Vec<char> = ('a'..='z')
            .chain('A'..='Z')
            .chain('0'..='9')
            .chain(PUNCT.chars())
            .chain([' ', '\t', '\n'])
            .collect();
        debug_assert_eq!(chars.len(), VOCAB_SIZE);
        let mut ascii_index = [OOV_INDEX as u8; 128];
        for (i, c) in chars.iter().enumerate() {
            ascii_index[*c as usize] = i as u8;
        }
        CharVocabulary { chars, ascii_index }
    }
}

impl CharVocabulary {
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index(&self, c: char) -> usize {
        if c.is_ascii() {
            self.ascii_index[c as usize] as usize
        } else {
            OOV_INDEX
        }
    }

    /// Inverse of [`index`](Self::index); the OOV slot decodes to U+FFFD.
    pub fn decode(&self, index: usize) -> char {
        self.chars.get(index).copied().unwrap_or('\u{FFFD}')
    }
}

/// One compact character row. Expands to [`FEATURE_DIM`] reals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CharFeature {
    pub char_index: u8,
    /// Bit `k` set iff an entity of `EntityType::ALL[k]` covers the char.
    pub entity_bits: u8,
    /// Bit 0: role-symbol column, bit 1: role-value column.
    pub role_bits: u8,
}

impl CharFeature {
    /// Indices of the columns that are 1.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        let ents = (0..ENTITY_BLOCK)
            .filter(move |k| self.entity_bits & (1 << k) != 0)
            .map(|k| CHAR_BLOCK + k);
        let roles = (0..ROLE_BLOCK)
            .filter(move |k| self.role_bits & (1 << k) != 0)
            .map(|k| ROLE_SYMBOL + k);
        std::iter::once(self.char_index as usize).chain(ents).chain(roles)
    }

    pub fn to_dense(&self) -> [f64; FEATURE_DIM] {
        let mut row = [0.0; FEATURE_DIM];
        for i in self.active() {
            row[i] = 1.0;
        }
        row
    }

    /// Rebuild from a dense row; fails unless it is a valid one-hot row.
    pub fn from_dense(row: &[f32]) -> Option<Self> {
        if row.len() != FEATURE_DIM || row.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return None;
        }
        let hot: Vec<usize> = (0..CHAR_BLOCK).filter(|&i| row[i] == 1.0).collect();
        let [char_index] = hot[..] else { return None };
        let bits = |base: usize, n: usize| -> u8 {
            (0..n).filter(|k| row[base + k] == 1.0).fold(0, |acc, k| acc | (1 << k))
        };
        Some(CharFeature {
            char_index: char_index as u8,
            entity_bits: bits(CHAR_BLOCK, ENTITY_BLOCK),
            role_bits: bits(ROLE_SYMBOL, ROLE_BLOCK),
        })
    }
}

/// Network input sequence: compact character rows, or arbitrary dense rows
/// (used by small synthetic problems and gradient checks).
#[derive(Clone, Debug, PartialEq)]
pub enum Sequence {
    Chars(Vec<CharFeature>),
    Dense { dim: usize, data: Vec<f64> },
}

impl Sequence {
    pub fn dense(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::dim("dense sequence", dim, data.len()));
        }
        Ok(Sequence::Dense { dim, data })
    }

    pub fn len(&self) -> usize {
        match self {
            Sequence::Chars(rows) => rows.len(),
            Sequence::Dense { dim, data } => data.len() / dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Sequence::Chars(_) => FEATURE_DIM,
            Sequence::Dense { dim, .. } => *dim,
        }
    }

    /// Visit the nonzero entries of row `t`.
    #[inline]
    pub fn for_each_nonzero(&self, t: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Sequence::Chars(rows) => rows[t].active().for_each(|i| f(i, 1.0)),
            Sequence::Dense { dim, data } => {
                for (i, &v) in data[t * dim..(t + 1) * dim].iter().enumerate() {
                    if v != 0.0 {
                        f(i, v);
                    }
                }
            }
        }
    }

    pub fn row_dense(&self, t: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.dim()];
        self.for_each_nonzero(t, |i, v| row[i] = v);
        row
    }
}

/// One network example.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedCandidate {
    pub candidate_id: String,
    pub sequence: Sequence,
    /// Document-level features `g`.
    pub global: Vec<f64>,
    /// Present only on the training path.
    pub label: Option<u8>,
}

/// Window of at most `width` characters around both spans, grown evenly
/// on both sides and shifted to stay inside `[0, text_len)`.
pub fn section_window(a: Span, b: Span, text_len: usize, width: usize) -> Result<Span> {
    let core = a.cover(&b);
    if core.len() > width {
        return Err(Error::SectionTooWide {
            width: core.len(),
            max: width,
        });
    }
    if text_len <= width {
        return Ok(Span::new(0, text_len));
    }
    let slack = width - core.len();
    let left = slack / 2;
    let right = slack - left;
    let mut start = core.start as isize - left as isize;
    let mut end = core.end + right;
    if start < 0 {
        end += (-start) as usize;
        start = 0;
    }
    let mut start = start as usize;
    if end > text_len {
        start -= end - text_len;
        end = text_len;
    }
    Ok(Span::new(start, end))
}

/// Character rows for `candidate.section_span`.
pub fn encode_characters(
    text: &[char],
    entities: &[EntitySpan],
    candidate: &ExtractionCandidate,
    vocab: &CharVocabulary,
) -> Vec<CharFeature> {
    let section = candidate.section_span;
    let mut rows: Vec<CharFeature> = text[section.start..section.end]
        .iter()
        .map(|&c| CharFeature {
            char_index: vocab.index(c) as u8,
            entity_bits: 0,
            role_bits: 0,
        })
        .collect();
    for e in entities {
        let lo = e.span.start.max(section.start);
        let hi = e.span.end.min(section.end);
        for pos in lo..hi {
            rows[pos - section.start].entity_bits |= 1 << e.entity_type.index();
        }
    }
    let mut mark = |span: Span, bits: u8| {
        let lo = span.start.max(section.start);
        let hi = span.end.min(section.end);
        for pos in lo..hi {
            rows[pos - section.start].role_bits |= bits;
        }
    };
    mark(candidate.symbol_span, 0b01);
    let value_bits = match candidate.kind {
        RelationKind::TickAbs => 0b10,
        RelationKind::TickRel => 0b11,
    };
    mark(candidate.value_span, value_bits);
    rows
}

/// Seeded 64-bit FNV-1a with a final avalanche so low bits are usable for
/// power-of-two bucketing.
pub fn hash_token(seed: u64, token: &str) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(PRIME);
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(PRIME);
    }
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^ (h >> 33)
}

fn check_pow2(dim: usize) -> Result<()> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidConfig(format!("feature dimension {dim} is not a power of two")));
    }
    Ok(())
}

/// Binary hashed bag of lowercased whitespace-token unigrams and bigrams of
/// the whole document.
pub fn encode_global(text: &str, dim: usize, hash_seed: u64) -> Result<Vec<f64>> {
    check_pow2(dim)?;
    let mask = (dim - 1) as u64;
    let tokens: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
    let mut g = vec![0.0; dim];
    for t in &tokens {
        g[(hash_token(hash_seed, &format!("1:{t}")) & mask) as usize] = 1.0;
    }
    for w in tokens.windows(2) {
        g[(hash_token(hash_seed, &format!("2:{} {}", w[0], w[1])) & mask) as usize] = 1.0;
    }
    Ok(g)
}

/// Tag sequence of the entities inside the candidate's section, in text
/// order, led by the candidate kind. Entities sharing a span collapse into
/// one tag (`NUM+CHG`).
pub fn entity_tags(entities: &[EntitySpan], candidate: &ExtractionCandidate) -> Vec<String> {
    let section = candidate.section_span;
    let spans: BTreeSet<Span> = entities
        .iter()
        .filter(|e| section.contains_span(&e.span))
        .map(|e| e.span)
        .collect();
    let mut tags = vec![kind_tag(candidate.kind).to_owned()];
    tags.extend(spans.into_iter().map(|span| span_tag(entities, span)));
    tags
}

/// Tags of the candidate's own symbol and value mentions. These go into
/// the bag as unigrams only, so where they sit is not encoded.
pub fn candidate_role_tags(entities: &[EntitySpan], candidate: &ExtractionCandidate) -> [String; 2] {
    [
        format!("CS:{}", span_tag(entities, candidate.symbol_span)),
        format!("CV:{}", span_tag(entities, candidate.value_span)),
    ]
}

fn kind_tag(kind: RelationKind) -> &'static str {
    match kind {
        RelationKind::TickAbs => "<ABS>",
        RelationKind::TickRel => "<REL>",
    }
}

fn span_tag(entities: &[EntitySpan], span: Span) -> String {
    let kinds: Vec<&str> = EntityType::ALL
        .iter()
        .filter(|ty| entities.iter().any(|e| e.span == span && e.entity_type == **ty))
        .map(|ty| ty.tag())
        .collect();
    kinds.join("+")
}

/// Binary hashed bag of 1- to 3-grams over [`entity_tags`] plus the
/// candidate role unigrams.
pub fn encode_entity_ngrams(
    entities: &[EntitySpan],
    candidate: &ExtractionCandidate,
    dim: usize,
    hash_seed: u64,
) -> Result<Vec<f64>> {
    check_pow2(dim)?;
    let mask = (dim - 1) as u64;
    let seed = hash_seed ^ 0xa5a5;
    let tags = entity_tags(entities, candidate);
    let mut out = vec![0.0; dim];
    for n in 1..=3 {
        for w in tags.windows(n) {
            let key = format!("{n}:{}", w.join(" "));
            out[(hash_token(seed, &key) & mask) as usize] = 1.0;
        }
    }
    for role in candidate_role_tags(entities, candidate) {
        out[(hash_token(seed, &format!("r:{role}")) & mask) as usize] = 1.0;
    }
    Ok(out)
}

/// Encoder settings shared by training and inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub section_width: usize,
    pub global_dim: usize,
    pub ngram_dim: usize,
    pub hash_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            section_width: DEFAULT_SECTION_WIDTH,
            global_dim: DEFAULT_GLOBAL_DIM,
            ngram_dim: DEFAULT_NGRAM_DIM,
            hash_seed: DEFAULT_HASH_SEED,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        check_pow2(self.global_dim)?;
        check_pow2(self.ngram_dim)?;
        if self.section_width == 0 {
            return Err(Error::InvalidConfig("section width must be positive".into()));
        }
        Ok(())
    }
}

/// Encodes every candidate of one document; the global vector is computed
/// once per document.
pub struct DocumentEncoder<'a> {
    pub chars: Vec<char>,
    pub entities: &'a [EntitySpan],
    pub global: Vec<f64>,
    vocab: &'a CharVocabulary,
    cfg: &'a EncoderConfig,
}

impl<'a> DocumentEncoder<'a> {
    pub fn new(
        doc: &Document,
        entities: &'a [EntitySpan],
        vocab: &'a CharVocabulary,
        cfg: &'a EncoderConfig,
    ) -> Result<Self> {
        Ok(DocumentEncoder {
            chars: doc.chars(),
            entities,
            global: encode_global(&doc.text, cfg.global_dim, cfg.hash_seed)?,
            vocab,
            cfg,
        })
    }

    pub fn encode(&self, candidate_id: String, candidate: &ExtractionCandidate, label: Option<u8>) -> EncodedCandidate {
        EncodedCandidate {
            candidate_id,
            sequence: Sequence::Chars(encode_characters(&self.chars, self.entities, candidate, self.vocab)),
            global: self.global.clone(),
            label,
        }
    }

    /// Input of the n-gram baseline: `g` followed by the entity-tag bag.
    pub fn baseline_input(&self, candidate: &ExtractionCandidate) -> Result<Vec<f64>> {
        let mut x = self.global.clone();
        x.extend(encode_entity_ngrams(self.entities, candidate, self.cfg.ngram_dim, self.cfg.hash_seed)?);
        Ok(x)
    }
}

/// Sidecar describing an encoded record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedSetMeta {
    pub feature_dim: usize,
    pub global_dim: usize,
    pub vocabulary: Vec<String>,
    pub hash_seed: u64,
    pub records: usize,
}

const LABEL_NONE: u8 = 0xff;

/// Write records as: id length (u32) + UTF-8 id, label byte (0xff when
/// absent), sequence length (u32), rows as f32, then `g` as f32. All
/// integers little-endian.
pub fn write_encoded(
    path: &Path,
    records: &[EncodedCandidate],
    vocab: &CharVocabulary,
    hash_seed: u64,
) -> Result<EncodedSetMeta> {
    let (feature_dim, global_dim) = match records.first() {
        Some(r) => (r.sequence.dim(), r.global.len()),
        None => (FEATURE_DIM, 0),
    };
    let mut w = io::create(path)?;
    let err = |e| Error::io(path, e);
    for r in records {
        if r.sequence.dim() != feature_dim || r.global.len() != global_dim {
            return Err(Error::dim("encoded record", feature_dim, r.sequence.dim()));
        }
        let id = r.candidate_id.as_bytes();
        w.write_all(&(id.len() as u32).to_le_bytes()).map_err(err)?;
        w.write_all(id).map_err(err)?;
        w.write_all(&[r.label.unwrap_or(LABEL_NONE)]).map_err(err)?;
        w.write_all(&(r.sequence.len() as u32).to_le_bytes()).map_err(err)?;
        for t in 0..r.sequence.len() {
            for v in r.sequence.row_dense(t) {
                w.write_all(&(v as f32).to_le_bytes()).map_err(err)?;
            }
        }
        for v in &r.global {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(err)?;
        }
    }
    w.flush().map_err(err)?;
    let meta = EncodedSetMeta {
        feature_dim,
        global_dim,
        vocabulary: vocab.chars().iter().map(|c| c.to_string()).collect(),
        hash_seed,
        records: records.len(),
    };
    io::write_json(&sidecar_path(path), &meta)?;
    Ok(meta)
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    p.into()
}

pub fn read_encoded(path: &Path) -> Result<(EncodedSetMeta, Vec<EncodedCandidate>)> {
    let meta: EncodedSetMeta = io::read_json(&sidecar_path(path))?;
    let mut bytes = Vec::new();
    io::open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let mut cur = ByteCursor { bytes: &bytes, pos: 0 };
    let mut records = Vec::with_capacity(meta.records);
    for _ in 0..meta.records {
        let id_len = cur.u32()? as usize;
        let candidate_id = String::from_utf8(cur.take(id_len)?.to_vec()).map_err(|e| Error::Format {
            what: "encoded record",
            detail: e.to_string(),
        })?;
        let label = match cur.take(1)?[0] {
            LABEL_NONE => None,
            b => Some(b),
        };
        let len = cur.u32()? as usize;
        let rows = cur.f32s(len * meta.feature_dim)?;
        let global: Vec<f64> = cur.f32s(meta.global_dim)?.into_iter().map(f64::from).collect();
        let chars: Option<Vec<CharFeature>> = if meta.feature_dim == FEATURE_DIM {
            rows.chunks(FEATURE_DIM).map(CharFeature::from_dense).collect()
        } else {
            None
        };
        let sequence = match chars {
            Some(c) => Sequence::Chars(c),
            None => Sequence::dense(meta.feature_dim, rows.into_iter().map(f64::from).collect())?,
        };
        records.push(EncodedCandidate {
            candidate_id,
            sequence,
            global,
            label,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            what: "encoded record file",
            detail: format!("{} trailing bytes", bytes.len() - cur.pos),
        });
    }
    Ok((meta, records))
}

pub(crate) struct ByteCursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteCursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or(Error::Format {
            what: "binary file",
            detail: "truncated".into(),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::Normalized;

    #[test]
    fn vocabulary_is_a_bijection_of_94_chars() {
        let v = CharVocabulary::default();
        assert_eq!(v.chars().len(), 94);
        let distinct: BTreeSet<char> = v.chars().iter().copied().collect();
        assert_eq!(distinct.len(), 94);
        for (i, c) in v.chars().iter().enumerate() {
            assert_eq!(v.index(*c), i);
            assert_eq!(v.decode(i), *c);
        }
        assert_eq!(v.index('€'), OOV_INDEX);
        assert_eq!(v.index('~'), OOV_INDEX);
        assert_eq!(v.index('\r'), OOV_INDEX);
    }

    #[test]
    fn window_examples() {
        let w = |a, b, len, width| section_window(Span::from(a), Span::from(b), len, width).unwrap();
        assert_eq!(w((0, 5), (10, 15), 50, 200), Span::new(0, 50));
        let s = w((300, 305), (310, 320), 1000, 20);
        assert_eq!(s.len(), 20);
        assert!(s.contains_span(&Span::new(300, 320)));
        assert_eq!(s, Span::new(300, 320));
        // 180 characters covered, 10 of slack each side
        assert_eq!(w((100, 105), (275, 280), 1000, 200), Span::new(90, 290));
        // clamped at the left edge, then grown right
        assert_eq!(w((2, 5), (10, 15), 1000, 40), Span::new(0, 40));
        // clamped at the right edge
        assert_eq!(w((990, 995), (996, 1000), 1000, 40), Span::new(960, 1000));
        assert!(matches!(
            section_window(Span::new(0, 5), Span::new(300, 305), 1000, 200),
            Err(Error::SectionTooWide { width: 305, max: 200 })
        ));
    }

    fn ent(ty: EntityType, s: usize, e: usize) -> EntitySpan {
        EntitySpan {
            entity_type: ty,
            span: Span::new(s, e),
            normalized: Normalized::Number(0.0),
        }
    }

    fn cand(kind: RelationKind, sym: (usize, usize), val: (usize, usize), section: (usize, usize)) -> ExtractionCandidate {
        ExtractionCandidate {
            doc_id: "d".into(),
            timestamp: 0,
            kind,
            symbol: "S".into(),
            value: 1.0,
            symbol_span: sym.into(),
            value_span: val.into(),
            section_span: section.into(),
            aux: Default::default(),
        }
    }

    #[test]
    fn encodes_plain_oov_and_role_chars() {
        let v = CharVocabulary::default();
        let text: Vec<char> = "ab €5 7".chars().collect();
        let ents = vec![
            ent(EntityType::TsSymbol, 0, 2),
            ent(EntityType::NumericValue, 4, 5),
            ent(EntityType::NumericValue, 6, 7),
        ];
        let c = cand(RelationKind::TickAbs, (0, 2), (6, 7), (0, 7));
        let rows = encode_characters(&text, &ents, &c, &v);
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[3].char_index as usize, OOV_INDEX);
        let a = rows[0].to_dense();
        assert_eq!(a[v.index('a')], 1.0);
        assert_eq!(a[CHAR_BLOCK + EntityType::TsSymbol.index()], 1.0);
        assert_eq!(a[ROLE_SYMBOL], 1.0);
        assert_eq!(a.iter().sum::<f64>(), 3.0);
        // '5' is a number but not this candidate's value
        let five = rows[4].to_dense();
        assert_eq!(five[CHAR_BLOCK + 1], 1.0);
        assert_eq!(five[ROLE_VALUE], 0.0);
        let seven = rows[6].to_dense();
        assert_eq!(seven[v.index('7')], 1.0);
        assert_eq!(seven[CHAR_BLOCK + 1], 1.0);
        assert_eq!(seven[ROLE_VALUE], 1.0);
        assert_eq!(seven[ROLE_SYMBOL], 0.0);
        // a space outside everything is just its one-hot
        let space = rows[2].to_dense();
        assert_eq!(space.iter().sum::<f64>(), 1.0);
        assert_eq!(space[v.index(' ')], 1.0);
    }

    #[test]
    fn change_candidates_mark_both_role_columns() {
        let v = CharVocabulary::default();
        let text: Vec<char> = "s up 2".chars().collect();
        let ents = vec![ent(EntityType::NumericValue, 5, 6), ent(EntityType::ChangeValue, 5, 6)];
        let abs = encode_characters(&text, &ents, &cand(RelationKind::TickAbs, (0, 1), (5, 6), (0, 6)), &v);
        let rel = encode_characters(&text, &ents, &cand(RelationKind::TickRel, (0, 1), (5, 6), (0, 6)), &v);
        assert_eq!(abs[5].role_bits, 0b10);
        assert_eq!(rel[5].role_bits, 0b11);
        assert_eq!(abs[5].entity_bits, rel[5].entity_bits);
    }

    #[test]
    fn dense_round_trip() {
        let f = CharFeature {
            char_index: 17,
            entity_bits: 0b00110,
            role_bits: 0b10,
        };
        let dense: Vec<f32> = f.to_dense().iter().map(|v| *v as f32).collect();
        assert_eq!(CharFeature::from_dense(&dense), Some(f));
        let mut two_hot = dense.clone();
        two_hot[3] = 1.0;
        assert_eq!(CharFeature::from_dense(&two_hot), None);
    }

    #[test]
    fn global_feature_examples() {
        assert!(encode_global("   \n\t ", 512, 1).unwrap().iter().all(|v| *v == 0.0));
        let one = encode_global("unemployment", 512, 1).unwrap();
        assert_eq!(one.iter().sum::<f64>(), 1.0);
        let a = encode_global("US  unemployment\tat 4.9%", 512, 1).unwrap();
        let b = encode_global("US unemployment at   4.9%", 512, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(encode_global("Same Text", 512, 1).unwrap(), encode_global("same text", 512, 1).unwrap());
        assert!(encode_global("x", 500, 1).is_err());
    }

    #[test]
    fn entity_tags_and_roles() {
        let ents = vec![
            ent(EntityType::TsSymbol, 0, 2),
            ent(EntityType::NumericValue, 4, 5),
            ent(EntityType::ChangeValue, 4, 5),
            ent(EntityType::NumericValue, 6, 7),
        ];
        let c = cand(RelationKind::TickRel, (0, 2), (4, 5), (0, 7));
        assert_eq!(entity_tags(&ents, &c), vec!["<REL>", "SYM", "NUM+CHG", "NUM"]);
        assert_eq!(candidate_role_tags(&ents, &c), ["CS:SYM".to_owned(), "CV:NUM+CHG".to_owned()]);
        // same kind, other value: the bag only differs if the role tags do
        let other = cand(RelationKind::TickAbs, (0, 2), (6, 7), (0, 7));
        let abs = cand(RelationKind::TickAbs, (0, 2), (4, 5), (0, 7));
        let a = encode_entity_ngrams(&ents, &other, 64, 1).unwrap();
        let b = encode_entity_ngrams(&ents, &abs, 64, 1).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn record_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.bin");
        let v = CharVocabulary::default();
        let rec = EncodedCandidate {
            candidate_id: "doc-1#0".into(),
            sequence: Sequence::Chars(vec![
                CharFeature { char_index: 3, entity_bits: 1, role_bits: 1 },
                CharFeature { char_index: 94, entity_bits: 0, role_bits: 0 },
            ]),
            global: vec![0.0, 1.0, 0.0, 1.0],
            label: Some(1),
        };
        let mut unlabeled = rec.clone();
        unlabeled.label = None;
        unlabeled.candidate_id = "doc-1#1".into();
        let meta = write_encoded(&path, &[rec.clone(), unlabeled.clone()], &v, 9).unwrap();
        assert_eq!(meta.records, 2);
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(size, 2 * (4 + 7 + 1 + 4 + 2 * 102 * 4 + 4 * 4));
        let (meta2, back) = read_encoded(&path).unwrap();
        assert_eq!(meta2, meta);
        assert_eq!(back, vec![rec, unlabeled]);
    }
}
