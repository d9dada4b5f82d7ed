//! On-disk operator cache: a little-endian binary blob per key plus a JSON sidecar.
//!
//! Reloads are bit-identical. A blob whose digest or key does not match its
//! sidecar is treated as a miss and rebuilt.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::riesz::{OperatorParts, RieszOperator};

const MAGIC: &[u8; 8] = b"RZFLOP02";
pub const CACHE_ENV: &str = "RIESZFLOW_CACHE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    #[serde(rename = "N")]
    pub n_dim: usize,
    pub a: f64,
    pub n: usize,
    #[serde(rename = "R_dom")]
    pub r_dom: f64,
}

impl CacheKey {
    pub fn new(grid: &RadialGrid, a: f64) -> Self {
        CacheKey {
            n_dim: grid.n_dim(),
            a,
            n: grid.len(),
            r_dom: grid.r_dom(),
        }
    }

    fn stem(&self) -> String {
        let mut h = Sha256::new();
        for bits in [
            self.n_dim as u64,
            self.a.to_bits(),
            self.n as u64,
            self.r_dom.to_bits(),
        ] {
            h.update(bits.to_le_bytes());
        }
        format!("op-{}", &hex::encode(h.finalize())[..20])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    key: CacheKey,
    sha256: String,
    bytes: u64,
}

/// Where an operator came from, with the digest of its arrays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OperatorSource {
    pub cache_hit: bool,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct OperatorCache {
    dir: PathBuf,
}

impl OperatorCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(OperatorCache { dir })
    }

    /// Cache in `$RIESZFLOW_CACHE`, if set and non-empty.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Ok(Some(Self::new(d)?)),
            _ => Ok(None),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn paths(&self, key: &CacheKey) -> (PathBuf, PathBuf) {
        let stem = key.stem();
        (
            self.dir.join(format!("{stem}.bin")),
            self.dir.join(format!("{stem}.json")),
        )
    }

    /// Cached operator for (grid, a), or `None` on a miss or a damaged entry.
    pub fn load(&self, grid: &Arc<RadialGrid>, a: f64) -> Option<(RieszOperator, String)> {
        let key = CacheKey::new(grid, a);
        let (bin, json) = self.paths(&key);
        let side: Sidecar = serde_json::from_slice(&fs::read(json).ok()?).ok()?;
        let blob = fs::read(bin).ok()?;
        let digest = hex::encode(Sha256::digest(&blob));
        if side.key != key || side.sha256 != digest || side.bytes != blob.len() as u64 {
            return None;
        }
        let parts = decode(&blob)?;
        let op = RieszOperator::from_parts(grid.clone(), parts).ok()?;
        (op.order() == a).then_some((op, digest))
    }

    pub fn store(&self, op: &RieszOperator) -> Result<String> {
        let parts = op
            .parts()
            .ok_or_else(|| Error::Config("only freshly built operators can be cached".into()))?;
        let key = CacheKey::new(op.grid(), op.order());
        let blob = encode(&parts);
        let digest = hex::encode(Sha256::digest(&blob));
        let (bin, json) = self.paths(&key);
        let side = Sidecar {
            key,
            sha256: digest.clone(),
            bytes: blob.len() as u64,
        };
        atomic_write(&bin, &blob)?;
        atomic_write(&json, serde_json::to_string_pretty(&side)?.as_bytes())?;
        Ok(digest)
    }

    pub fn load_or_build(
        &self,
        grid: &Arc<RadialGrid>,
        a: f64,
    ) -> Result<(RieszOperator, OperatorSource)> {
        if let Some((op, sha256)) = self.load(grid, a) {
            return Ok((
                op,
                OperatorSource {
                    cache_hit: true,
                    sha256,
                },
            ));
        }
        let op = RieszOperator::build(grid.clone(), a)?;
        let sha256 = self.store(&op)?;
        Ok((
            op,
            OperatorSource {
                cache_hit: false,
                sha256,
            },
        ))
    }
}

/// Builds the operator, going through `cache` when one is given.
pub fn obtain_operator(
    cache: Option<&OperatorCache>,
    grid: &Arc<RadialGrid>,
    a: f64,
) -> Result<(RieszOperator, OperatorSource)> {
    match cache {
        Some(c) => c.load_or_build(grid, a),
        None => {
            let op = RieszOperator::build(grid.clone(), a)?;
            let sha256 = operator_hash(&op);
            Ok((
                op,
                OperatorSource {
                    cache_hit: false,
                    sha256,
                },
            ))
        }
    }
}

/// SHA-256 of the serialized arrays, equal to the digest of the cached blob.
pub fn operator_hash(op: &RieszOperator) -> String {
    match op.parts() {
        Some(parts) => hex::encode(Sha256::digest(encode(&parts))),
        None => {
            let mut h = Sha256::new();
            h.update(
                op.weights()
                    .iter()
                    .flat_map(|w| w.to_le_bytes())
                    .collect::<Vec<_>>(),
            );
            h.update(op.gain().to_le_bytes());
            h.update(op.grid().r_dom().to_le_bytes());
            hex::encode(h.finalize())
        }
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn encode(p: &OperatorParts) -> Vec<u8> {
    let mut out =
        Vec::with_capacity(64 + 8 * (p.weights.len() + p.far_eval.len() + 2 * p.far_nodes.len()));
    out.extend_from_slice(MAGIC);
    for x in [p.order, p.c, p.r_far] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for arr in [&p.weights, &p.far_nodes, &p.far_volumes, &p.far_eval] {
        out.extend_from_slice(&(arr.len() as u64).to_le_bytes());
        for x in arr.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn word(&mut self) -> Option<[u8; 8]> {
        let (head, rest) = self.buf.split_first_chunk::<8>()?;
        self.buf = rest;
        Some(*head)
    }

    fn f64(&mut self) -> Option<f64> {
        self.word().map(f64::from_le_bytes)
    }

    fn vec(&mut self) -> Option<Vec<f64>> {
        let len = usize::try_from(u64::from_le_bytes(self.word()?)).ok()?;
        if len > self.buf.len() / 8 {
            return None;
        }
        (0..len).map(|_| self.f64()).collect()
    }
}

fn decode(blob: &[u8]) -> Option<OperatorParts> {
    let mut r = Reader {
        buf: blob.strip_prefix(MAGIC)?,
    };
    let (order, c, r_far) = (r.f64()?, r.f64()?, r.f64()?);
    let parts = OperatorParts {
        order,
        c,
        r_far,
        weights: r.vec()?,
        far_nodes: r.vec()?,
        far_volumes: r.vec()?,
        far_eval: r.vec()?,
    };
    r.buf.is_empty().then_some(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ProfileKind, RadialDensity};

    #[test]
    fn reload_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = OperatorCache::new(dir.path()).unwrap();
        let grid = RadialGrid::uniform(2, 48, 1.5).unwrap();
        let (a, src) = cache.load_or_build(&grid, 0.3).unwrap();
        assert!(!src.cache_hit);
        let (b, src2) = cache.load_or_build(&grid, 0.3).unwrap();
        assert!(src2.cache_hit);
        assert_eq!(src.sha256, src2.sha256);
        assert_eq!(src.sha256, operator_hash(&a));
        let bits = |o: &RieszOperator| o.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let rho =
            RadialDensity::profile(grid.clone(), ProfileKind::Bump { radius: 1.0 }, 1.0).unwrap();
        let (u, v) = (a.potential(&rho).unwrap(), b.potential(&rho).unwrap());
        assert_eq!(u.inner, v.inner);
        assert_eq!(u.outer, v.outer);
    }

    #[test]
    fn keys_separate_and_damage_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let cache = OperatorCache::new(dir.path()).unwrap();
        let g1 = RadialGrid::uniform(1, 32, 1.0).unwrap();
        let g2 = RadialGrid::uniform(1, 32, 1.25).unwrap();
        cache.load_or_build(&g1, 0.2).unwrap();
        assert!(cache.load(&g2, 0.2).is_none());
        assert!(cache.load(&g1, 0.1).is_none());
        let (bin, _) = cache.paths(&CacheKey::new(&g1, 0.2));
        let mut blob = fs::read(&bin).unwrap();
        blob[100] ^= 1;
        fs::write(&bin, blob).unwrap();
        assert!(cache.load(&g1, 0.2).is_none());
        let (_, src) = cache.load_or_build(&g1, 0.2).unwrap();
        assert!(!src.cache_hit);
        assert!(cache.load(&g1, 0.2).is_some());
    }

    #[test]
    fn rescaled_operators_are_not_cached() {
        let dir = tempfile::tempdir().unwrap();
        let cache = OperatorCache::new(dir.path()).unwrap();
        let op = RieszOperator::build(RadialGrid::uniform(1, 16, 1.0).unwrap(), 0.2).unwrap();
        assert!(cache.store(&op.rescaled(2.0).unwrap()).is_err());
        assert_ne!(
            operator_hash(&op),
            operator_hash(&op.rescaled(2.0).unwrap())
        );
    }

    #[test]
    fn truncated_blob_does_not_decode() {
        let op = RieszOperator::build(RadialGrid::uniform(1, 8, 1.0).unwrap(), 0.2).unwrap();
        let blob = encode(&op.parts().unwrap());
        assert!(decode(&blob).is_some());
        assert!(decode(&blob[..blob.len() - 8]).is_none());
        assert!(decode(&blob[1..]).is_none());
    }
}
