//! Embedding files.
//!
//! Native layout (all integers little-endian):
//!
//! ```text
//! "STVEMB01"  u8 version  u8 flags (1 = provenance known, 2 = output vectors present)
//! provenance: u32 beta, u64 seed, u32 iterations, u32 dim,
//!             u64 corpus fp, u64 vocab fp, u64 config fp
//! u64 V, u32 N
//! V × (u32 byte length, word bytes, u64 count)
//! V×N f32 input vectors, row-major
//! [V×N f32 output vectors]
//! u64 checksum of every preceding byte
//! ```
//!
//! The reference layout is the classic word2vec binary: an ASCII `V N\n`
//! header, then per word its bytes, a space, N little-endian `f32`, and `\n`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::cbow::{Embedding, Matrix, Provenance};
use crate::corpus::Vocabulary;
use crate::io::{fingerprint, put_f32s, put_u32, put_u64, ByteReader};
use crate::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"STVEMB01";
pub const FORMAT_VERSION: u8 = 1;

const FLAG_META: u8 = 1;
const FLAG_OUTPUT: u8 = 2;

pub fn encode_native(e: &Embedding, include_output: bool) -> Vec<u8> {
    let v = e.len();
    let n = e.dim();
    let with_output = include_output && e.output().is_some();
    let mut out = Vec::with_capacity(64 + v * (16 + n * 4 * (1 + with_output as usize)));
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.push(FORMAT_VERSION);
    let flags = if e.meta().is_some() { FLAG_META } else { 0 } | if with_output { FLAG_OUTPUT } else { 0 };
    out.push(flags);
    let m = e.meta().copied().unwrap_or(Provenance {
        beta: 0,
        seed: 0,
        iterations: 0,
        dim: n as u32,
        corpus_fingerprint: 0,
        vocab_fingerprint: e.vocab().fingerprint(),
        config_fingerprint: 0,
    });
    put_u32(&mut out, m.beta);
    put_u64(&mut out, m.seed);
    put_u32(&mut out, m.iterations);
    put_u32(&mut out, m.dim);
    put_u64(&mut out, m.corpus_fingerprint);
    put_u64(&mut out, m.vocab_fingerprint);
    put_u64(&mut out, m.config_fingerprint);
    put_u64(&mut out, v as u64);
    put_u32(&mut out, n as u32);
    for (w, c) in e.vocab().iter() {
        put_u32(&mut out, w.len() as u32);
        out.extend_from_slice(w.as_bytes());
        put_u64(&mut out, c);
    }
    put_f32s(&mut out, e.input().as_slice());
    if with_output {
        put_f32s(&mut out, e.output().unwrap().as_slice());
    }
    let sum = fingerprint(&out);
    put_u64(&mut out, sum);
    out
}

pub fn decode_native(bytes: &[u8], path: &Path) -> Result<Embedding> {
    let integrity = |reason: String| Error::Integrity {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < EMBEDDING_MAGIC.len() + 8 || &bytes[..8] != EMBEDDING_MAGIC {
        return Err(integrity("missing STVEMB01 magic".into()));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if fingerprint(body) != u64::from_le_bytes(sum.try_into().unwrap()) {
        return Err(integrity("checksum mismatch (truncated or corrupt file)".into()));
    }

    let mut r = ByteReader::new(&body[8..]);
    let version = r.u8().map_err(integrity)?;
    if version != FORMAT_VERSION {
        return Err(integrity(format!("unsupported format version {version}")));
    }
    let flags = r.u8().map_err(integrity)?;
    let mut read_meta = || -> std::result::Result<Provenance, String> {
        Ok(Provenance {
            beta: r.u32()?,
            seed: r.u64()?,
            iterations: r.u32()?,
            dim: r.u32()?,
            corpus_fingerprint: r.u64()?,
            vocab_fingerprint: r.u64()?,
            config_fingerprint: r.u64()?,
        })
    };
    let meta = read_meta().map_err(integrity)?;
    let v = r.u64().map_err(integrity)? as usize;
    let n = r.u32().map_err(integrity)? as usize;
    if meta.dim as usize != n {
        return Err(Error::Format(format!(
            "{}: header declares dim {} but matrix width is {n}",
            path.display(),
            meta.dim
        )));
    }
    // Every vocabulary entry takes at least 12 bytes.
    if v > r.remaining() / 12 {
        return Err(integrity(format!("vocabulary size {v} exceeds file size")));
    }
    let mut entries = Vec::with_capacity(v);
    for _ in 0..v {
        let len = r.u32().map_err(integrity)? as usize;
        let word = std::str::from_utf8(r.take(len).map_err(integrity)?)
            .map_err(|_| integrity("word is not UTF-8".into()))?
            .to_owned();
        let count = r.u64().map_err(integrity)?;
        entries.push((word, count));
    }
    let vocab = Vocabulary::try_from_entries(entries)?;
    if vocab.fingerprint() != meta.vocab_fingerprint {
        return Err(integrity("vocabulary fingerprint mismatch".into()));
    }
    let cells = v
        .checked_mul(n)
        .ok_or_else(|| integrity("matrix size overflows".into()))?;
    let input = Matrix::from_vec(v, n, r.f32s(cells).map_err(integrity)?);
    let output = if flags & FLAG_OUTPUT != 0 {
        Some(Matrix::from_vec(v, n, r.f32s(cells).map_err(integrity)?))
    } else {
        None
    };
    if r.remaining() != 0 {
        return Err(integrity(format!("{} trailing bytes", r.remaining())));
    }
    let meta = (flags & FLAG_META != 0).then_some(meta);
    Embedding::new(Arc::new(vocab), input, output, meta)
}

/// Writes the native format atomically (temporary file, then rename).
pub fn save_embedding(e: &Embedding, path: &Path, include_output: bool) -> Result<()> {
    write_atomic(path, &encode_native(e, include_output))
}

pub fn load_embedding(path: &Path) -> Result<Embedding> {
    let bytes = fs::read(path).map_err(|err| Error::io(path, err))?;
    decode_native(&bytes, path)
}

pub fn encode_reference(e: &Embedding) -> Vec<u8> {
    let n = e.dim();
    let mut out = format!("{} {}\n", e.len(), n).into_bytes();
    for (id, (w, _)) in e.vocab().iter().enumerate() {
        out.extend_from_slice(w.as_bytes());
        out.push(b' ');
        put_f32s(&mut out, e.input().row(id));
        out.push(b'\n');
    }
    out
}

/// Parses the reference binary layout. Counts are unknown and set to 1,
/// which keeps the file's word order; provenance is marked unknown.
pub fn decode_reference(bytes: &[u8], path: &Path) -> Result<Embedding> {
    let integrity = |reason: String| Error::Integrity {
        path: path.to_path_buf(),
        reason,
    };
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| integrity("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| integrity("header is not text".into()))?;
    let mut parts = header.split_whitespace().map(str::parse::<usize>);
    let (v, n) = match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(v)), Some(Ok(n)), None) if n > 0 => (v, n),
        _ => return Err(integrity(format!("bad header {header:?}"))),
    };
    let mut r = ByteReader::new(&bytes[nl + 1..]);
    if v > r.remaining() / (n * 4 + 2) {
        return Err(integrity(format!("declared {v} words exceed the file size")));
    }
    let mut entries = Vec::with_capacity(v);
    let mut data = Vec::with_capacity(v * n);
    for i in 0..v {
        let start = r.position();
        loop {
            let b = r.u8().map_err(integrity)?;
            if b == b' ' {
                break;
            }
        }
        let raw = &bytes[nl + 1 + start..nl + 1 + r.position() - 1];
        let word = std::str::from_utf8(raw)
            .map_err(|_| integrity(format!("word {i} is not UTF-8")))?
            .trim_start_matches('\n');
        if word.is_empty() {
            return Err(integrity(format!("word {i} is empty")));
        }
        entries.push((word.to_owned(), 1));
        data.extend(r.f32s(n).map_err(integrity)?);
        // Writers terminate rows with '\n'; tolerate its absence on the last row.
        if r.remaining() > 0 && bytes[nl + 1 + r.position()] == b'\n' {
            r.u8().map_err(integrity)?;
        }
    }
    if r.remaining() != 0 {
        return Err(integrity(format!("{} trailing bytes after {v} words", r.remaining())));
    }
    let vocab = Vocabulary::try_from_entries(entries)?;
    Embedding::new(Arc::new(vocab), Matrix::from_vec(v, n, data), None, None)
}

pub fn export_reference(e: &Embedding, path: &Path) -> Result<()> {
    write_atomic(path, &encode_reference(e))
}

pub fn import_reference(path: &Path) -> Result<Embedding> {
    let bytes = fs::read(path).map_err(|err| Error::io(path, err))?;
    decode_reference(&bytes, path)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".into(),
    });
    let write = || -> std::io::Result<()> {
        let mut f = BufWriter::new(File::create(&tmp)?);
        f.write_all(bytes)?;
        f.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|err| Error::io(path, err))
}
