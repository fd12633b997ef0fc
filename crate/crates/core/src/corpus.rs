//! Corpus preparation: character-level cleanup, vocabulary construction,
//! token-id encoding and the frequency subsampling law.
//!
//! Cleanup works on plain text. Letters are lowercased, every digit becomes
//! its own spelled-out English token (`30` → `three zero`), and anything else
//! outside `a..z` acts as a separator. Markup stripping is expected to happen
//! upstream.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::fingerprint;
use crate::{Error, Result};

pub const DIGIT_WORDS: [&str; 10] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

/// Magic header of the binary token-id stream file.
pub const TOKEN_MAGIC: &[u8; 8] = b"STVTOK01";

pub const DEFAULT_MIN_COUNT: u64 = 5;

/// Spelled-out English name of an ASCII digit.
pub fn spell_digit(d: char) -> Result<&'static str> {
    d.to_digit(10)
        .filter(|_| d.is_ascii_digit())
        .map(|v| DIGIT_WORDS[v as usize])
        .ok_or_else(|| Error::contract(format!("spell_digit expects an ASCII digit, got {d:?}")))
}

/// Cleaned tokens, each a nonempty run of `a..z`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanTokenStream {
    tokens: Vec<String>,
    /// Bytes dropped because they were not valid UTF-8.
    pub invalid_bytes: usize,
}

impl CleanTokenStream {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// Space-joined rendering; cleaning it again yields the same stream.
    pub fn to_text(&self) -> String {
        self.tokens.join(" ")
    }
}

impl<S: Into<String>> FromIterator<S> for CleanTokenStream {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        CleanTokenStream {
            tokens: iter.into_iter().map(Into::into).collect(),
            invalid_bytes: 0,
        }
    }
}

/// Incremental cleaner. Feed arbitrary byte chunks; tokens are handed to the
/// sink as soon as they are complete.
#[derive(Debug, Default)]
pub struct Cleaner {
    word: String,
    /// Incomplete UTF-8 sequence carried over from the previous chunk.
    pending: Vec<u8>,
    invalid_bytes: usize,
}

impl Cleaner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn invalid_bytes(&self) -> usize {
        self.invalid_bytes
    }

    pub fn feed(&mut self, bytes: &[u8], sink: &mut impl FnMut(&str)) {
        let joined;
        let input = if self.pending.is_empty() {
            bytes
        } else {
            let mut buf = std::mem::take(&mut self.pending);
            buf.extend_from_slice(bytes);
            joined = buf;
            &joined[..]
        };

        let mut chunks = input.utf8_chunks().peekable();
        while let Some(chunk) = chunks.next() {
            for ch in chunk.valid().chars() {
                self.push_char(ch, sink);
            }
            let invalid = chunk.invalid();
            if invalid.is_empty() {
                continue;
            }
            // A truncated multi-byte sequence at the very end may complete in the next chunk.
            let at_end = chunks.peek().is_none();
            let offset = invalid.as_ptr() as usize - input.as_ptr() as usize;
            if at_end && offset + invalid.len() == input.len() && could_be_prefix(invalid) {
                self.pending = invalid.to_vec();
            } else {
                self.invalid_bytes += invalid.len();
                self.end_word(sink);
            }
        }
    }

    pub fn finish(&mut self, sink: &mut impl FnMut(&str)) {
        if !self.pending.is_empty() {
            self.invalid_bytes += self.pending.len();
            self.pending.clear();
        }
        self.end_word(sink);
    }

    fn push_char(&mut self, ch: char, sink: &mut impl FnMut(&str)) {
        if ch.is_ascii_alphabetic() {
            self.word.push(ch.to_ascii_lowercase());
        } else if ch.is_ascii_digit() {
            self.end_word(sink);
            sink(DIGIT_WORDS[(ch as u8 - b'0') as usize]);
        } else {
            self.end_word(sink);
        }
    }

    fn end_word(&mut self, sink: &mut impl FnMut(&str)) {
        if !self.word.is_empty() {
            sink(&self.word);
            self.word.clear();
        }
    }
}

fn could_be_prefix(bytes: &[u8]) -> bool {
    let expected = match bytes[0] {
        0xC2..=0xDF => 2,
        0xE0..=0xEF => 3,
        0xF0..=0xF4 => 4,
        _ => return false,
    };
    bytes.len() < expected && bytes[1..].iter().all(|b| b & 0xC0 == 0x80)
}

pub fn clean_text(raw: &[u8]) -> CleanTokenStream {
    let mut tokens = Vec::new();
    let mut cleaner = Cleaner::new();
    let mut sink = |t: &str| tokens.push(t.to_owned());
    cleaner.feed(raw, &mut sink);
    cleaner.finish(&mut sink);
    CleanTokenStream {
        tokens,
        invalid_bytes: cleaner.invalid_bytes(),
    }
}

/// Streams a reader through the cleaner. Returns the number of invalid bytes skipped.
pub fn clean_reader<R: Read>(mut reader: R, mut sink: impl FnMut(&str)) -> std::io::Result<usize> {
    let mut cleaner = Cleaner::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        cleaner.feed(&buf[..n], &mut sink);
    }
    cleaner.finish(&mut sink);
    Ok(cleaner.invalid_bytes())
}

/// Word counts accumulated over one shard of the corpus.
///
/// Merging is commutative: counts add and the first-occurrence position is the
/// minimum, so shards may be merged in any order as long as each was created
/// with its global starting offset.
#[derive(Debug, Clone, Default)]
pub struct VocabCounter {
    entries: HashMap<String, (u64, u64)>,
    position: u64,
}

impl VocabCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counter whose first token sits at global position `offset`.
    pub fn with_offset(offset: u64) -> Self {
        VocabCounter {
            entries: HashMap::new(),
            position: offset,
        }
    }

    pub fn add(&mut self, token: &str) {
        let pos = self.position;
        self.position += 1;
        match self.entries.get_mut(token) {
            Some(e) => e.0 += 1,
            None => {
                self.entries.insert(token.to_owned(), (1, pos));
            }
        }
    }

    pub fn merge(&mut self, other: VocabCounter) {
        for (word, (count, first)) in other.entries {
            let e = self.entries.entry(word).or_insert((0, first));
            e.0 += count;
            e.1 = e.1.min(first);
        }
        self.position = self.position.max(other.position);
    }

    pub fn total(&self) -> u64 {
        self.entries.values().map(|e| e.0).sum()
    }

    pub fn finish(self, min_count: u64) -> Result<Vocabulary> {
        if self.entries.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if min_count == 0 {
            return Err(Error::contract("min_count must be positive"));
        }
        let mut kept: Vec<(String, u64, u64)> = self
            .entries
            .into_iter()
            .filter(|(_, (c, _))| *c >= min_count)
            .map(|(w, (c, f))| (w, c, f))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        Ok(Vocabulary::from_sorted(
            kept.into_iter().map(|(w, c, _)| (w, c)).collect(),
        ))
    }
}

/// Bijective word ↔ id map ordered by descending frequency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Builds from `(word, count)` pairs already in id order.
    pub fn from_sorted(entries: Vec<(String, u64)>) -> Self {
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (w, c)) in entries.into_iter().enumerate() {
            index.insert(w.clone(), i as u32);
            words.push(w);
            counts.push(c);
        }
        let total_tokens = counts.iter().sum();
        Vocabulary {
            words,
            counts,
            index,
            total_tokens,
        }
    }

    /// Checked variant of [`Vocabulary::from_sorted`] used when loading files.
    pub fn try_from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (i, (w, c)) in entries.iter().enumerate() {
            if *c == 0 {
                return Err(Error::Format(format!("word {w:?} has zero count")));
            }
            if !seen.insert(w.as_str()) {
                return Err(Error::Format(format!("duplicate word {w:?}")));
            }
            if i > 0 && entries[i - 1].1 < *c {
                return Err(Error::Format(format!(
                    "vocabulary not in descending count order at {w:?}"
                )));
            }
        }
        Ok(Self::from_sorted(entries))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.words.iter().map(String::as_str).zip(self.counts.iter().copied())
    }

    /// Stable 64-bit digest of words and counts in id order.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::new();
        for (w, c) in self.iter() {
            bytes.extend_from_slice(w.as_bytes());
            bytes.push(b'\t');
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        fingerprint(&bytes)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (w, c) in self.iter() {
            writeln!(out, "{w}\t{c}")?;
        }
        out.flush()
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("vocabulary line {} lacks a tab", lineno + 1)))?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("vocabulary line {} has a bad count", lineno + 1)))?;
            entries.push((w.to_owned(), c));
        }
        Self::try_from_entries(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(f))
    }
}

/// Counts every token and keeps words seen at least `min_count` times.
pub fn build_vocab(stream: &CleanTokenStream, min_count: u64) -> Result<Vocabulary> {
    let mut counter = VocabCounter::new();
    for t in stream.iter() {
        counter.add(t);
    }
    counter.finish(min_count)
}

/// Maps tokens to ids, dropping out-of-vocabulary words.
pub fn encode(stream: &CleanTokenStream, vocab: &Vocabulary) -> Vec<u32> {
    encode_iter(stream.iter(), vocab).collect()
}

pub fn encode_iter<'a, I>(tokens: I, vocab: &'a Vocabulary) -> impl Iterator<Item = u32> + 'a
where
    I: IntoIterator<Item = &'a str>,
    I::IntoIter: 'a,
{
    tokens.into_iter().filter_map(|t| vocab.id(t))
}

/// Probability of keeping one occurrence of a word during frequency
/// subsampling: `min(1, (sqrt(f/t) + 1) * t/f)` with `f = count/total`.
pub fn subsample_keep_prob(word_count: u64, total_tokens: u64, t: f64) -> Result<f64> {
    if total_tokens == 0 {
        return Err(Error::contract("subsample_keep_prob: total_tokens is zero"));
    }
    if word_count == 0 {
        return Err(Error::contract("subsample_keep_prob: word_count is zero"));
    }
    if t.is_nan() || t <= 0.0 {
        return Err(Error::contract(format!(
            "subsample threshold must be positive, got {t}"
        )));
    }
    let f = word_count as f64 / total_tokens as f64;
    let ratio = f / t;
    Ok(((ratio.sqrt() + 1.0) / ratio).min(1.0))
}

/// Writes the binary token stream: magic header, then little-endian `u32` ids.
pub fn write_token_ids<W: Write>(mut out: W, ids: &[u32]) -> std::io::Result<()> {
    out.write_all(TOKEN_MAGIC)?;
    let mut buf = Vec::with_capacity(ids.len().min(1 << 16) * 4);
    for chunk in ids.chunks(1 << 16) {
        buf.clear();
        for id in chunk {
            buf.extend_from_slice(&id.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()
}

pub fn read_token_ids<R: Read>(mut input: R) -> Result<Vec<u32>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < TOKEN_MAGIC.len() || &bytes[..8] != TOKEN_MAGIC {
        return Err(Error::Format("token stream lacks the STVTOK01 header".into()));
    }
    let body = &bytes[8..];
    if body.len() % 4 != 0 {
        return Err(Error::Format(format!(
            "token stream body of {} bytes is not a whole number of ids",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn save_token_ids(path: &Path, ids: &[u32]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_token_ids(BufWriter::new(f), ids).map_err(|e| Error::io(path, e))
}

pub fn load_token_ids(path: &Path) -> Result<Vec<u32>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_token_ids(BufReader::new(f)).map_err(|e| match e {
        Error::RawIo(source) => Error::io(path, source),
        other => other,
    })
}

/// Summary of a preprocessing pass, as printed by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CorpusStats {
    pub raw_tokens: u64,
    pub distinct_words: u64,
    pub retained_words: u64,
    pub encoded_tokens: u64,
    pub invalid_bytes: u64,
    #[serde(with = "crate::io::hex64")]
    pub fingerprint: u64,
}

/// Two-pass preprocessing of a text file: count, then encode.
pub fn preprocess_file(input: &Path, min_count: u64) -> Result<(Vocabulary, Vec<u32>, CorpusStats)> {
    let open = || File::open(input).map_err(|e| Error::io(input, e));

    let mut counter = VocabCounter::new();
    let invalid = clean_reader(BufReader::new(open()?), |t| counter.add(t)).map_err(|e| Error::io(input, e))?;
    let raw_tokens = counter.total();
    let distinct = counter.entries.len() as u64;
    let vocab = counter.finish(min_count)?;

    let mut ids = Vec::with_capacity(vocab.total_tokens() as usize);
    clean_reader(BufReader::new(open()?), |t| {
        if let Some(id) = vocab.id(t) {
            ids.push(id);
        }
    })
    .map_err(|e| Error::io(input, e))?;

    let stats = CorpusStats {
        raw_tokens,
        distinct_words: distinct,
        retained_words: vocab.len() as u64,
        encoded_tokens: ids.len() as u64,
        invalid_bytes: invalid as u64,
        fingerprint: ids_fingerprint(&ids),
    };
    Ok((vocab, ids, stats))
}

/// Digest of a token-id stream, recorded as corpus provenance.
pub fn ids_fingerprint(ids: &[u32]) -> u64 {
    let mut bytes = Vec::with_capacity(ids.len() * 4);
    for id in ids {
        bytes.extend_from_slice(&id.to_le_bytes());
    }
    fingerprint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        clean_text(s.as_bytes()).into_tokens()
    }

    #[test]
    fn digits_are_spelled_out() {
        assert_eq!(toks("30"), ["three", "zero"]);
        assert_eq!(toks("abc30def"), ["abc", "three", "zero", "def"]);
        assert_eq!(spell_digit('3').unwrap(), "three");
        assert_eq!(spell_digit('0').unwrap(), "zero");
        assert_eq!(spell_digit('9').unwrap(), "nine");
        assert!(matches!(spell_digit('x'), Err(Error::Contract(_))));
        assert!(spell_digit('٣').is_err());
    }

    #[test]
    fn punctuation_and_case() {
        assert!(toks("").is_empty());
        assert_eq!(toks("E-mail ME!"), ["e", "mail", "me"]);
        assert_eq!(toks("  Naïve café\tX"), ["na", "ve", "caf", "x"]);
    }

    #[test]
    fn invalid_utf8_is_skipped_and_counted() {
        let out = clean_text(b"ab\xffcd \xc3\xa9e");
        assert_eq!(out.tokens(), ["ab", "cd", "e"]);
        assert_eq!(out.invalid_bytes, 1);
    }

    #[test]
    fn multibyte_sequence_split_across_chunks() {
        let mut tokens = Vec::new();
        let mut sink = |t: &str| tokens.push(t.to_owned());
        let mut c = Cleaner::new();
        c.feed(b"ab\xc3", &mut sink);
        c.feed(b"\xa9cd", &mut sink);
        c.finish(&mut sink);
        assert_eq!(tokens, ["ab", "cd"]);
        assert_eq!(c.invalid_bytes(), 0);
    }

    #[test]
    fn truncated_sequence_at_eof_counts_as_invalid() {
        let out = clean_text(b"ab\xe2\x82");
        assert_eq!(out.tokens(), ["ab"]);
        assert_eq!(out.invalid_bytes, 2);
    }

    #[test]
    fn vocab_examples() {
        let s: CleanTokenStream = ["a", "b", "a"].into_iter().collect();
        let v = build_vocab(&s, 1).unwrap();
        assert_eq!(v.words(), ["a", "b"]);
        assert_eq!(v.counts(), [2, 1]);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.total_tokens(), 3);

        let v = build_vocab(&s, 2).unwrap();
        assert_eq!(v.words(), ["a"]);
        assert_eq!(v.total_tokens(), 2);
    }

    #[test]
    fn vocab_ties_follow_first_occurrence() {
        let s: CleanTokenStream = ["z", "y", "x", "y", "z", "x"].into_iter().collect();
        assert_eq!(build_vocab(&s, 1).unwrap().words(), ["z", "y", "x"]);
    }

    #[test]
    fn empty_stream_is_an_error() {
        let s = CleanTokenStream::default();
        assert!(matches!(build_vocab(&s, 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn encode_drops_oov() {
        let v = Vocabulary::from_sorted(vec![("a".into(), 2), ("b".into(), 1)]);
        let s: CleanTokenStream = ["a", "x", "b"].into_iter().collect();
        assert_eq!(encode(&s, &v), [0, 1]);
        assert!(encode(&CleanTokenStream::default(), &v).is_empty());
        let s: CleanTokenStream = ["a", "a"].into_iter().collect();
        assert_eq!(encode(&s, &v), [0, 0]);
    }

    #[test]
    fn keep_prob_examples() {
        let t = 1e-4;
        // f = t
        assert_eq!(subsample_keep_prob(1, 10_000, t).unwrap(), 1.0);
        // f = 100 t  => (10 + 1) / 100
        let p = subsample_keep_prob(100, 10_000, t).unwrap();
        assert!((p - 0.11).abs() < 1e-12, "{p}");
        // f = 1e-2 at t = 1e-4
        let p = subsample_keep_prob(1, 100, t).unwrap();
        assert!((p - 0.11).abs() < 1e-12, "{p}");
        assert!(subsample_keep_prob(1, 0, t).is_err());
        assert_eq!(subsample_keep_prob(5, 10, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let v = Vocabulary::from_sorted(vec![("the".into(), 9), ("cat".into(), 3)]);
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(buf, b"the\t9\ncat\t3\n");
        assert_eq!(Vocabulary::read_tsv(&buf[..]).unwrap(), v);
        assert!(Vocabulary::read_tsv(&b"a\t1\nb\t2\n"[..]).is_err());
    }

    #[test]
    fn token_stream_file_format() {
        let mut buf = Vec::new();
        write_token_ids(&mut buf, &[1, 258]).unwrap();
        assert_eq!(buf, b"STVTOK01\x01\x00\x00\x00\x02\x01\x00\x00");
        assert_eq!(read_token_ids(&buf[..]).unwrap(), [1, 258]);
        assert!(read_token_ids(&buf[..11]).is_err());
        assert!(read_token_ids(&b"NOTMAGIC"[..]).is_err());
    }

    #[test]
    fn shard_merge_is_order_independent() {
        let text = ["b", "a", "c", "a", "b", "d", "c", "a"];
        let mut left = VocabCounter::with_offset(0);
        text[..4].iter().for_each(|t| left.add(t));
        let mut right = VocabCounter::with_offset(4);
        text[4..].iter().for_each(|t| right.add(t));

        let mut lr = left.clone();
        lr.merge(right.clone());
        let mut rl = right;
        rl.merge(left);

        let mut whole = VocabCounter::new();
        text.iter().for_each(|t| whole.add(t));
        let expected = whole.finish(1).unwrap();
        assert_eq!(lr.finish(1).unwrap(), expected);
        assert_eq!(rl.finish(1).unwrap(), expected);
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_ascii(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let out = clean_text(&bytes);
            for t in out.tokens() {
                prop_assert!(!t.is_empty());
                prop_assert!(t.bytes().all(|b| b.is_ascii_lowercase()), "{t:?}");
            }
        }

        #[test]
        fn cleaning_is_idempotent(s in "\\PC{0,200}") {
            let once = clean_text(s.as_bytes());
            let twice = clean_text(once.to_text().as_bytes());
            prop_assert_eq!(once.tokens(), twice.tokens());
        }

        #[test]
        fn counts_are_conserved(words in proptest::collection::vec("[a-e]{1,3}", 1..200)) {
            let s: CleanTokenStream = words.iter().map(String::as_str).collect();
            let v = build_vocab(&s, 1).unwrap();
            prop_assert_eq!(v.total_tokens(), s.len() as u64);
            prop_assert_eq!(v.counts().iter().sum::<u64>(), s.len() as u64);
            for w in v.counts().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            for (i, w) in v.words().iter().enumerate() {
                prop_assert_eq!(v.id(w), Some(i as u32));
            }
        }

        #[test]
        fn keep_prob_bounded_and_decreasing(total in 1_000u64..10_000_000, a in 1u64..1_000_000, b in 1u64..1_000_000) {
            let t = 1e-4;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (lo, hi) = (lo.min(total), hi.min(total));
            let p_lo = subsample_keep_prob(lo, total, t).unwrap();
            let p_hi = subsample_keep_prob(hi, total, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&p_lo));
            prop_assert!((0.0..=1.0).contains(&p_hi));
            let f_lo = lo as f64 / total as f64;
            if f_lo > t && hi > lo {
                prop_assert!(p_hi < p_lo);
            }
        }
    }
}
