//! File binding: one record per document in a directory.
//!
//! Record file `<encoded id>.ctxe`, little-endian:
//!
//! ```text
//! magic     8 bytes  b"CTXEMBD\0"
//! version   u32      RECORD_VERSION
//! layers    u32
//! tokens    u32
//! dim       u32
//! id        u32 len + UTF-8
//! token*    u32 len + UTF-8       (`tokens` entries)
//! values    f32 × layers·tokens·dim, layer-major
//! ```
//!
//! Ids made only of `[A-Za-z0-9._-]` are used verbatim as file stems; any
//! other id is hex-encoded behind an `x-` prefix.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{EmbeddingProvider, LayerwiseTokenEmbeddings, ProviderError};

const MAGIC: &[u8; 8] = b"CTXEMBD\0";
pub const RECORD_VERSION: u32 = 1;
pub const RECORD_EXTENSION: &str = "ctxe";

fn file_stem(id: &str) -> String {
    let plain = !id.is_empty()
        && !id.starts_with("x-")
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if plain {
        id.to_string()
    } else {
        let mut s = String::from("x-");
        for b in id.as_bytes() {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

pub fn record_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{}.{RECORD_EXTENSION}", file_stem(id)))
}

pub fn write_record(dir: &Path, id: &str, emb: &LayerwiseTokenEmbeddings) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(record_path(dir, id))?);
    w.write_all(MAGIC)?;
    for v in [RECORD_VERSION, emb.layers as u32, emb.tokens as u32, emb.dim as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    write_str(&mut w, id)?;
    for t in &emb.token_strings {
        write_str(&mut w, t)?;
    }
    for v in &emb.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn protocol(msg: impl Into<String>) -> ProviderError {
    ProviderError::Protocol(msg.into())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ProviderError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| protocol(format!("truncated record: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, ProviderError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|e| protocol(format!("truncated record: {e}")))?;
    String::from_utf8(buf).map_err(|_| protocol("record string is not UTF-8"))
}

/// Reads the record stored for `id`; returns the id recorded inside too.
pub fn read_record(dir: &Path, id: &str) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
    let path = record_path(dir, id);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(ProviderError::NotFound(id.to_string())),
        Err(e) => return Err(ProviderError::Transport(format!("{}: {e}", path.display()))),
    };
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| protocol("truncated record header"))?;
    if &magic != MAGIC {
        return Err(protocol(format!("{} is not an embedding record", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != RECORD_VERSION {
        return Err(protocol(format!("unsupported record version {version}")));
    }
    let layers = read_u32(&mut r)? as usize;
    let tokens = read_u32(&mut r)? as usize;
    let dim = read_u32(&mut r)? as usize;
    let stored_id = read_str(&mut r)?;
    if stored_id != id {
        return Err(protocol(format!("record for {id:?} holds id {stored_id:?}")));
    }
    let token_strings = (0..tokens).map(|_| read_str(&mut r)).collect::<Result<Vec<_>, _>>()?;
    let n = layers * tokens * dim;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes).map_err(|_| protocol("truncated record values"))?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(LayerwiseTokenEmbeddings {
        layers,
        tokens,
        dim,
        values,
        token_strings,
    })
}

/// Provider backed by a directory of precomputed records.
///
/// The token list passed to `embed` is ignored: the record holds whatever
/// tokens the producing model saw.
#[derive(Debug, Clone)]
pub struct FileProvider {
    dir: PathBuf,
    layers: usize,
    dim: usize,
}

impl FileProvider {
    pub fn new(dir: impl Into<PathBuf>, layers: usize, dim: usize) -> Self {
        FileProvider {
            dir: dir.into(),
            layers,
            dim,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl EmbeddingProvider for FileProvider {
    fn layers(&self) -> usize {
        self.layers
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, doc_id: &str, _tokens: &[String]) -> Result<LayerwiseTokenEmbeddings, ProviderError> {
        read_record(&self.dir, doc_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document, TopicLabel};
    use crate::ctxembed::{ctx_doc_matrix, PoolingConfig, StubProvider};

    #[test]
    fn stub_export_matches_direct_calls() {
        let corpus = Corpus::new(vec![
            Document::labeled("em0001", TopicLabel::Modeling, &["bond", "ring_opening"]),
            Document::labeled("odd id/ü", TopicLabel::Synthesis, &["yield"]),
        ])
        .unwrap();
        let stub = StubProvider::new(4, 6);
        let dir = tempfile::tempdir().unwrap();
        stub.export_dir(&corpus, dir.path()).unwrap();
        let files = FileProvider::new(dir.path(), 4, 6);
        for doc in &corpus {
            assert_eq!(files.embed(&doc.id, &[]).unwrap(), stub.embed(&doc.id, &doc.tokens).unwrap());
        }
        let cfg = PoolingConfig { last_layers: 4, ..Default::default() };
        assert_eq!(
            ctx_doc_matrix(&files, &corpus, &cfg, 2).unwrap(),
            ctx_doc_matrix(&stub, &corpus, &cfg, 2).unwrap()
        );
        assert!(record_path(dir.path(), "odd id/ü").file_name().unwrap().to_str().unwrap().starts_with("x-"));
    }

    #[test]
    fn missing_and_corrupt_records() {
        let dir = tempfile::tempdir().unwrap();
        let files = FileProvider::new(dir.path(), 1, 1);
        assert_eq!(files.embed("nope", &[]), Err(ProviderError::NotFound("nope".into())));
        std::fs::write(record_path(dir.path(), "junk"), b"garbage!").unwrap();
        assert!(matches!(files.embed("junk", &[]), Err(ProviderError::Protocol(_))));
    }
}
