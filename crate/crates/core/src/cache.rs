//! Binary operator cache.
//!
//! Layout (all little-endian):
//!
//! ```text
//! "GPBE" | u32 version | u64 K | u64 L | u64 N_GL | u64 N_L | u64 family id
//!        | f64 C_lambda | f64 lambda | u64 n
//! M (n*n f64, row-major) | Q_0 .. Q_{n-1} (n*n f64 each)
//! u64 checksum (first 8 bytes of SHA-256 over M and Q)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::assembly::{BuildMetadata, CollisionMatrices, CollisionOperator};
use crate::basis::Discretization;
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};

pub const MAGIC: &[u8; 4] = b"GPBE";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_BYTES: usize = 4 + 4 + 8 * 8;

/// Parameters that identify an operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheKey {
    pub k_max: usize,
    pub l_max: usize,
    pub n_gl: usize,
    pub n_l: usize,
    pub kernel: KernelSpec,
}

impl CacheKey {
    pub fn of(op: &CollisionOperator) -> Self {
        Self {
            k_max: op.disc.k_max(),
            l_max: op.disc.l_max(),
            n_gl: op.n_gl,
            n_l: op.n_l,
            kernel: op.kernel,
        }
    }

    /// Conventional file name inside a cache directory.
    pub fn file_name(&self) -> String {
        format!(
            "op_K{}_L{}_gl{}_leb{}_{}_c{:.6e}_lam{}.gpbe",
            self.k_max,
            self.l_max,
            self.n_gl,
            self.n_l,
            self.kernel.family(),
            self.kernel.c_lambda(),
            self.kernel.lambda()
        )
    }
}

/// First eight bytes of SHA-256 over the little-endian payload.
pub fn payload_checksum(mass: &[f64], q: &[f64]) -> u64 {
    let mut h = Sha256::new();
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in mass.chunks(4096).chain(q.chunks(4096)) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        h.update(&buf);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Writes `op` to `path`. An existing file is replaced only with `force`.
pub fn cache_write(op: &CollisionOperator, path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Exists(path.to_path_buf()));
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let n = op.n();
    let tmp = path.with_extension("tmp");
    {
        let file = fs::File::create(&tmp)?;
        let mut w = std::io::BufWriter::with_capacity(1 << 20, file);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for v in [
            op.disc.k_max(),
            op.disc.l_max(),
            op.n_gl,
            op.n_l,
            op.kernel.family().id() as usize,
        ] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&op.kernel.c_lambda().to_le_bytes())?;
        w.write_all(&op.kernel.lambda().to_le_bytes())?;
        w.write_all(&(n as u64).to_le_bytes())?;
        for v in op.mass.iter().chain(op.q.raw()) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&payload_checksum(&op.mass, op.q.raw()).to_le_bytes())?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, len: usize) -> Result<&[u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::CacheChecksum {
                path: self.path.to_path_buf(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.take(count * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Header of a cache file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CacheHeader {
    pub version: u32,
    pub key: CacheKey,
    pub n: usize,
}

fn parse_header(r: &mut Reader<'_>) -> Result<CacheHeader> {
    let path = r.path.to_path_buf();
    if r.bytes.len() < 4 || &r.bytes[..4] != MAGIC {
        return Err(Error::CacheMagic { path });
    }
    r.pos = 4;
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::CacheVersion {
            path,
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let k_max = r.u64()? as usize;
    let l_max = r.u64()? as usize;
    let n_gl = r.u64()? as usize;
    let n_l = r.u64()? as usize;
    let family_id = r.u64()?;
    let c_lambda = r.f64()?;
    let lambda = r.f64()?;
    let n = r.u64()? as usize;
    let family = u32::try_from(family_id)
        .ok()
        .and_then(KernelFamily::from_id)
        .ok_or_else(|| Error::CacheChecksum { path: path.clone() })?;
    let kernel = KernelSpec::new(family, c_lambda, lambda).map_err(|_| Error::CacheChecksum { path: path.clone() })?;
    Ok(CacheHeader {
        version,
        key: CacheKey {
            k_max,
            l_max,
            n_gl,
            n_l,
            kernel,
        },
        n,
    })
}

/// Reads only the header.
pub fn cache_header(path: &Path) -> Result<CacheHeader> {
    use std::io::Read;
    let mut buf = Vec::with_capacity(HEADER_BYTES);
    fs::File::open(path)?.take(HEADER_BYTES as u64).read_to_end(&mut buf)?;
    parse_header(&mut Reader {
        bytes: &buf,
        pos: 0,
        path,
    })
}

fn mismatch(path: &Path, field: &'static str, cached: impl ToString, requested: impl ToString) -> Error {
    Error::CacheMismatch {
        path: path.to_path_buf(),
        field,
        cached: cached.to_string(),
        requested: requested.to_string(),
    }
}

/// Compares a header against requested parameters.
pub fn check_key(path: &Path, cached: &CacheKey, requested: &CacheKey) -> Result<()> {
    let pairs = [
        ("K", cached.k_max, requested.k_max),
        ("L", cached.l_max, requested.l_max),
        ("N_GL", cached.n_gl, requested.n_gl),
        ("N_L", cached.n_l, requested.n_l),
    ];
    for (field, c, r) in pairs {
        if c != r {
            return Err(mismatch(path, field, c, r));
        }
    }
    let (ck, rk) = (cached.kernel, requested.kernel);
    if ck.lambda().to_bits() != rk.lambda().to_bits() {
        return Err(mismatch(path, "lambda", ck.lambda(), rk.lambda()));
    }
    if ck.c_lambda().to_bits() != rk.c_lambda().to_bits() {
        return Err(mismatch(path, "C_lambda", ck.c_lambda(), rk.c_lambda()));
    }
    if ck.family() != rk.family() {
        return Err(mismatch(path, "kernel", ck.family(), rk.family()));
    }
    Ok(())
}

/// Reads an operator, optionally checking it against requested parameters.
pub fn cache_read(path: &Path, expect: Option<&CacheKey>) -> Result<CollisionOperator> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let header = parse_header(&mut r)?;
    if let Some(req) = expect {
        check_key(path, &header.key, req)?;
    }
    let key = header.key;
    let disc = Discretization::new(key.k_max, key.l_max).map_err(|_| Error::CacheChecksum {
        path: path.to_path_buf(),
    })?;
    let n = header.n;
    if n != disc.n() {
        return Err(mismatch(path, "n", n, disc.n()));
    }
    let mass = r.f64s(n * n)?;
    let q = r.f64s(n * n * n)?;
    let stored = r.u64()?;
    if r.pos != bytes.len() || stored != payload_checksum(&mass, &q) {
        return Err(Error::CacheChecksum {
            path: path.to_path_buf(),
        });
    }
    let created_unix = fs::metadata(path)
        .and_then(|m| m.modified())
        .ok()
        .and_then(|t| t.duration_since(std::time::UNIX_EPOCH).ok())
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = BuildMetadata {
        format_version: header.version,
        created_unix,
        assembly_seconds: 0.0,
        checksum: stored,
    };
    CollisionOperator::from_parts(disc, key.kernel, key.n_gl, key.n_l, mass, CollisionMatrices::from_raw(n, q)?, meta)
}

/// Loads the operator for `key` from `dir` if present, otherwise assembles
/// and stores it. Returns the operator and whether it was reused.
pub fn load_or_build(dir: &Path, key: &CacheKey) -> Result<(CollisionOperator, bool)> {
    let path = cache_path(dir, key);
    if path.exists() {
        return Ok((cache_read(&path, Some(key))?, true));
    }
    let disc = Discretization::new(key.k_max, key.l_max)?;
    let op = CollisionOperator::build(disc, key.kernel, key.n_gl, key.n_l)?;
    cache_write(&op, &path, true)?;
    Ok((op, false))
}

pub fn cache_path(dir: &Path, key: &CacheKey) -> PathBuf {
    dir.join(key.file_name())
}
